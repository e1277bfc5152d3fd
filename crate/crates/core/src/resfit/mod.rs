//! Reflection spectroscopy: S11 models, the three-stage background-corrected
//! fit and synthetic traces for validation.

mod fit;
pub mod model;

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::constants::TWO_PI;
use crate::error::{Error, Result};

pub use fit::{background_correct, background_correct_with, fit, FitOptions, FitResult, ParamErrors, Preliminary, StageReport};
pub use model::{dip_depth_db, ideal_response, model_response, ResonanceParams};

/// Fewest samples accepted in a trace.
pub const MIN_SAMPLES: usize = 32;

/// Complex reflection versus angular frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S11Trace {
    /// rad/s, strictly increasing.
    pub omega: Vec<f64>,
    pub s11: Vec<Complex64>,
    /// Noise standard deviation per quadrature, when known.
    pub noise_sigma: Option<f64>,
}

impl S11Trace {
    pub fn new(omega: Vec<f64>, s11: Vec<Complex64>) -> Result<Self> {
        if omega.len() != s11.len() {
            return Err(Error::InvalidTrace(format!("{} frequencies but {} samples", omega.len(), s11.len())));
        }
        if omega.len() < MIN_SAMPLES {
            return Err(Error::InvalidTrace(format!("{} samples, need at least {MIN_SAMPLES}", omega.len())));
        }
        if omega.iter().any(|w| !w.is_finite()) || s11.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidTrace("non-finite value".into()));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrace("frequencies must be strictly increasing".into()));
        }
        Ok(Self { omega, s11, noise_sigma: None })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.omega[0], self.omega[self.len() - 1])
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { s11: self.s11.iter().map(|z| z * factor).collect(), ..self.clone() }
    }

    /// Reads `freq_Hz,re_S11,im_S11` rows; the header is required.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let expect = ["freq_Hz", "re_S11", "im_S11"];
        if header.len() < 3 || header.iter().take(3).ne(expect) {
            return Err(Error::Format(format!("expected header freq_Hz,re_S11,im_S11, got {:?}", header)));
        }
        let mut omega = Vec::new();
        let mut s11 = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Format(format!("row {}: missing column {k}", i + 2)))?
                    .parse()
                    .map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))
            };
            omega.push(TWO_PI * num(0)?);
            s11.push(Complex64::new(num(1)?, num(2)?));
        }
        Self::new(omega, s11)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["freq_Hz", "re_S11", "im_S11"]).map_err(err)?;
        for (om, z) in self.omega.iter().zip(&self.s11) {
            w.write_record([format!("{:.17e}", om / TWO_PI), format!("{:.17e}", z.re), format!("{:.17e}", z.im)])
                .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples `model_response` on `n` evenly spaced frequencies over
/// `[omega_lo, omega_hi]` and adds i.i.d. Gaussian noise of standard
/// deviation `sigma` to each quadrature.
pub fn synth_trace(
    params: &ResonanceParams,
    omega_lo: f64,
    omega_hi: f64,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<S11Trace> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter { name: "n", reason: format!("need at least {MIN_SAMPLES} points") });
    }
    if !(omega_hi > omega_lo && omega_lo > 0.0) {
        return Err(Error::InvalidParameter { name: "span", reason: "need 0 < omega_lo < omega_hi".into() });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter { name: "sigma", reason: "must be >= 0".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter { name: "sigma", reason: e.to_string() })?;
    let omega: Vec<f64> = (0..n).map(|i| omega_lo + (omega_hi - omega_lo) * i as f64 / (n - 1) as f64).collect();
    let s11 = omega
        .iter()
        .map(|&w| {
            let z = model_response(params, w);
            if sigma > 0.0 {
                z + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                z
            }
        })
        .collect();
    let mut t = S11Trace::new(omega, s11)?;
    t.noise_sigma = Some(sigma);
    Ok(t)
}
