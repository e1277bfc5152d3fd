//! Three-stage resonance fit.
//!
//! 1. Locate the dip, mask ±`mask_widths` preliminary linewidths around it and
//!    fit the complex background to what is left.
//! 2. Divide the trace by that background and fit the θ-rotated resonance.
//! 3. Refit the full model to the raw samples, seeded by stages 1 and 2.
//!
//! Least squares run on interleaved real and imaginary residuals with an
//! analytic Jacobian, in parameters scaled to O(1) about the seed.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use num_complex::Complex64;
use serde::Serialize;

use super::model::ResonanceParams;
use super::S11Trace;
use crate::error::{Error, Result};

/// Fit settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Half-width of the stage-1 mask, in preliminary linewidths.
    pub mask_widths: f64,
    /// Half-width of the fit window, in preliminary linewidths; `None` fits the whole trace.
    pub window_widths: Option<f64>,
    /// Dip depth must exceed this many times the noise floor.
    pub min_depth_snr: f64,
    /// Relative step tolerance of the least-squares solver.
    pub xtol: f64,
    /// Function-evaluation budget per stage, in multiples of the parameter count.
    pub patience: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { mask_widths: 3.0, window_widths: Some(5.0), min_depth_snr: 3.0, xtol: 1e-10, patience: 200 }
    }
}

/// Initial estimates from the raw trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preliminary {
    pub omega0: f64,
    /// Full width at half dip depth.
    pub kappa: f64,
    pub depth: f64,
    /// Largest excursion expected from noise alone over the trace.
    pub noise_floor: f64,
    /// Per-quadrature noise estimate from second differences.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: &'static str,
    pub evaluations: usize,
    pub residual_norm: f64,
    pub termination: String,
}

/// One-sigma standard errors, same units as the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ParamErrors {
    pub omega0: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
    pub theta: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub phi0: f64,
    pub phi1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ResonanceParams,
    pub errors: ParamErrors,
    /// `‖S11_model - S11‖₂` over the fitted samples.
    pub residual_norm: f64,
    /// Residual standard deviation per quadrature.
    pub sigma_hat: f64,
    pub samples: usize,
    pub preliminary: Preliminary,
    pub stages: Vec<StageReport>,
}

impl FitResult {
    pub fn q_int(&self) -> f64 {
        self.params.q_int()
    }

    pub fn q_ext(&self) -> f64 {
        self.params.q_ext()
    }
}

const N: usize = 9;
const OMEGA0: usize = 0;
const KAPPA_INT: usize = 1;
const KAPPA_EXT: usize = 2;
const THETA: usize = 3;
const A0: usize = 4;
const A1: usize = 5;
const A2: usize = 6;
const PHI0: usize = 7;
const PHI1: usize = 8;

#[cfg(test)]
fn to_array(p: &ResonanceParams) -> [f64; N] {
    [p.omega0, p.kappa_int, p.kappa_ext, p.theta, p.a0, p.a1, p.a2, p.phi0, p.phi1]
}

fn from_array(v: &[f64; N], omega_ref: f64) -> ResonanceParams {
    ResonanceParams {
        omega0: v[OMEGA0],
        kappa_int: v[KAPPA_INT],
        kappa_ext: v[KAPPA_EXT],
        theta: v[THETA],
        a0: v[A0],
        a1: v[A1],
        a2: v[A2],
        phi0: v[PHI0],
        phi1: v[PHI1],
        omega_ref,
    }
}

/// Model value and its gradient with respect to all nine parameters.
fn model_and_gradient(p: &[f64; N], omega_ref: f64, w: f64, resonant: bool, background: bool) -> (Complex64, [Complex64; N]) {
    let i = Complex64::i();
    let mut g = [Complex64::new(0.0, 0.0); N];
    let d = w - omega_ref;
    let (bg, amp_basis) = if background {
        let amp = p[A0] + d * (p[A1] + d * p[A2]);
        let phase = Complex64::from_polar(1.0, p[PHI0] + p[PHI1] * d);
        (amp * phase, phase)
    } else {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    };
    let res = if resonant {
        let den = Complex64::new(p[KAPPA_INT] + p[KAPPA_EXT], 2.0 * (w - p[OMEGA0]));
        let rot = Complex64::from_polar(1.0, p[THETA]);
        let num = 2.0 * p[KAPPA_EXT] * rot;
        let q = num / den;
        let q2 = q / den;
        g[OMEGA0] = bg * (-2.0 * i) * q2;
        g[KAPPA_INT] = bg * q2;
        g[KAPPA_EXT] = bg * (q2 - 2.0 * rot / den);
        g[THETA] = bg * (-i * q);
        1.0 - q
    } else {
        Complex64::new(1.0, 0.0)
    };
    let m = bg * res;
    if background {
        g[A0] = amp_basis * res;
        g[A1] = g[A0] * d;
        g[A2] = g[A1] * d;
        g[PHI0] = i * m;
        g[PHI1] = i * m * d;
    }
    (m, g)
}

struct Problem<'a> {
    omega: &'a [f64],
    data: &'a [Complex64],
    seed: [f64; N],
    scale: [f64; N],
    active: Vec<usize>,
    omega_ref: f64,
    resonant: bool,
    background: bool,
    x: DVector<f64>,
}

impl Problem<'_> {
    fn full(&self) -> [f64; N] {
        let mut p = self.seed;
        for (k, &j) in self.active.iter().enumerate() {
            p[j] = self.seed[j] + self.scale[j] * self.x[k];
        }
        p
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.full();
        let mut r = DVector::zeros(2 * self.omega.len());
        for (k, (&w, z)) in self.omega.iter().zip(self.data).enumerate() {
            let (m, _) = model_and_gradient(&p, self.omega_ref, w, self.resonant, self.background);
            r[2 * k] = m.re - z.re;
            r[2 * k + 1] = m.im - z.im;
        }
        Some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let p = self.full();
        let mut j = DMatrix::zeros(2 * self.omega.len(), self.active.len());
        for (k, &w) in self.omega.iter().enumerate() {
            let (_, g) = model_and_gradient(&p, self.omega_ref, w, self.resonant, self.background);
            for (c, &a) in self.active.iter().enumerate() {
                j[(2 * k, c)] = g[a].re * self.scale[a];
                j[(2 * k + 1, c)] = g[a].im * self.scale[a];
            }
        }
        Some(j)
    }
}

struct StageOutcome {
    params: [f64; N],
    report: StageReport,
    jacobian: DMatrix<f64>,
    rss: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    stage: &'static str,
    omega: &[f64],
    data: &[Complex64],
    seed: [f64; N],
    scale: [f64; N],
    active: Vec<usize>,
    omega_ref: f64,
    resonant: bool,
    background: bool,
    opts: &FitOptions,
) -> Result<StageOutcome> {
    let n = active.len();
    let problem = Problem { omega, data, seed, scale, active, omega_ref, resonant, background, x: DVector::zeros(n) };
    let lm = LevenbergMarquardt::new().with_xtol(opts.xtol).with_ftol(1e-15).with_patience(opts.patience);
    let (problem, report) = lm.minimize(problem);
    let ok = report.termination.was_successful()
        || matches!(report.termination, TerminationReason::NoImprovementPossible(_));
    let termination = format!("{:?}", report.termination);
    let r = problem.residuals().ok_or_else(|| Error::FitFailed { stage, reason: "residuals unavailable".into() })?;
    let rss = r.norm_squared();
    if !ok || !rss.is_finite() {
        return Err(Error::FitFailed {
            stage,
            reason: format!("{termination} after {} evaluations, residual {:.3e}", report.number_of_evaluations, rss.sqrt()),
        });
    }
    let jacobian = problem.jacobian().expect("analytic jacobian");
    Ok(StageOutcome {
        params: problem.full(),
        report: StageReport { stage, evaluations: report.number_of_evaluations, residual_norm: rss.sqrt(), termination },
        jacobian,
        rss,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares polynomial of degree `deg` in `u`; returns coefficients, lowest first.
fn polyfit(u: &[f64], y: &[f64], deg: usize) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(u.len(), deg + 1, |r, c| u[r].powi(c as i32));
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

fn polyval(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * u + k)
}

/// Dip position, depth, half-depth width and noise level.
fn preliminary(omega: &[f64], s: &[Complex64], opts: &FitOptions) -> Result<Preliminary> {
    let n = omega.len();
    let mag: Vec<f64> = s.iter().map(|z| z.norm()).collect();
    // Second differences cancel smooth structure; each quadrature then has variance 6σ².
    let mut d2 = Vec::with_capacity(2 * n);
    for k in 1..n - 1 {
        let z = s[k + 1] - 2.0 * s[k] + s[k - 1];
        d2.push(z.re.abs());
        d2.push(z.im.abs());
    }
    let sigma = 1.4826 * median(d2) / 6f64.sqrt();

    // Baseline: quadratic through |S11|, dropping points below it until stable.
    let (lo, hi) = (omega[0], omega[n - 1]);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let u: Vec<f64> = omega.iter().map(|w| (w - mid) / half).collect();
    let mut keep: Vec<bool> = vec![true; n];
    let mut coef = vec![0.0; 3];
    for _ in 0..30 {
        let (uk, yk): (Vec<f64>, Vec<f64>) =
            (0..n).filter(|&k| keep[k]).map(|k| (u[k], mag[k])).unzip();
        if uk.len() < 8 {
            break;
        }
        coef = polyfit(&uk, &yk, 2).ok_or_else(|| Error::FitFailed { stage: "preliminary", reason: "baseline fit".into() })?;
        let next: Vec<bool> = (0..n).map(|k| mag[k] >= polyval(&coef, u[k]) - 3.0 * sigma).collect();
        if next == keep {
            break;
        }
        keep = next;
    }
    let baseline = |k: usize| polyval(&coef, u[k]);
    let (kmin, _) = (0..n)
        .map(|k| (k, mag[k] - baseline(k)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty trace");
    let depth = baseline(kmin) - mag[kmin];
    let noise_floor = sigma * (2.0 * (n as f64).ln()).sqrt();
    let floor = (opts.min_depth_snr * noise_floor).max(1e-6 * baseline(kmin).abs());
    if !(depth > floor) {
        return Err(Error::NoDip { depth, noise: noise_floor });
    }

    // Width at half depth, interpolated on each flank.
    let level = |k: usize| baseline(k) - 0.5 * depth;
    let cross = |k0: usize, k1: usize| {
        let (f0, f1) = (mag[k0] - level(k0), mag[k1] - level(k1));
        let t = if f1 != f0 { f0 / (f0 - f1) } else { 0.5 };
        omega[k0] + t * (omega[k1] - omega[k0])
    };
    let mut l = kmin;
    while l > 0 && mag[l] < level(l) {
        l -= 1;
    }
    let wl = if l == kmin { omega[kmin] } else { cross(l + 1, l) };
    let mut r = kmin;
    while r < n - 1 && mag[r] < level(r) {
        r += 1;
    }
    let wr = if r == kmin { omega[kmin] } else { cross(r - 1, r) };
    let spacing = (hi - lo) / (n - 1) as f64;
    let kappa = (wr - wl).max(2.0 * spacing);
    Ok(Preliminary { omega0: omega[kmin], kappa, depth, noise_floor, sigma })
}

/// Unwraps a phase sequence in place.
fn unwrap(phase: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for k in 1..phase.len() {
        let mut d = phase[k] - phase[k - 1];
        while d > PI {
            d -= TAU;
        }
        while d < -PI {
            d += TAU;
        }
        phase[k] = phase[k - 1] + d;
    }
}

/// Three-stage fit of the full reflection model.
pub fn fit(trace: &S11Trace, opts: &FitOptions) -> Result<FitResult> {
    if !(opts.mask_widths > 0.0 && opts.xtol > 0.0 && opts.patience > 0) {
        return Err(Error::InvalidParameter { name: "fit_options", reason: "widths, xtol and patience must be > 0".into() });
    }
    let pre = preliminary(&trace.omega, &trace.s11, opts)?;

    // Fit window around the preliminary dip.
    let mut idx: Vec<usize> = (0..trace.len()).collect();
    if let Some(k) = opts.window_widths {
        let sel: Vec<usize> = idx.iter().copied().filter(|&i| (trace.omega[i] - pre.omega0).abs() <= k * pre.kappa).collect();
        if sel.len() >= super::MIN_SAMPLES {
            idx = sel;
        }
    }
    let omega: Vec<f64> = idx.iter().map(|&i| trace.omega[i]).collect();
    let data: Vec<Complex64> = idx.iter().map(|&i| trace.s11[i]).collect();
    let omega_ref = pre.omega0;
    let half = omega.iter().map(|w| (w - omega_ref).abs()).fold(0.0, f64::max).max(pre.kappa);

    // Stage 1: background from the samples outside the mask.
    let mut order: Vec<usize> = (0..omega.len()).collect();
    order.sort_by(|&a, &b| (omega[b] - omega_ref).abs().total_cmp(&(omega[a] - omega_ref).abs()));
    let outside = order.iter().filter(|&&k| (omega[k] - omega_ref).abs() > opts.mask_widths * pre.kappa).count();
    let mut bg_idx: Vec<usize> = order[..outside.max(12).min(order.len())].to_vec();
    bg_idx.sort_unstable();
    let bw: Vec<f64> = bg_idx.iter().map(|&k| omega[k]).collect();
    let bz: Vec<Complex64> = bg_idx.iter().map(|&k| data[k]).collect();
    let bu: Vec<f64> = bw.iter().map(|w| (w - omega_ref) / half).collect();
    let amp = polyfit(&bu, &bz.iter().map(|z| z.norm()).collect::<Vec<_>>(), 2)
        .ok_or_else(|| Error::FitFailed { stage: "background", reason: "amplitude seed".into() })?;
    let mut phase: Vec<f64> = bz.iter().map(|z| z.arg()).collect();
    unwrap(&mut phase);
    let ph = polyfit(&bu, &phase, 1).ok_or_else(|| Error::FitFailed { stage: "background", reason: "phase seed".into() })?;

    let mut seed = [0.0; N];
    seed[A0] = amp[0];
    seed[A1] = amp[1] / half;
    seed[A2] = amp[2] / (half * half);
    seed[PHI0] = ph[0];
    seed[PHI1] = ph[1] / half;
    seed[OMEGA0] = pre.omega0;
    seed[KAPPA_INT] = pre.kappa / 2.0;
    seed[KAPPA_EXT] = pre.kappa / 2.0;
    let a_scale = seed[A0].abs().max(1e-300);
    let mut scale = [pre.kappa, pre.kappa, pre.kappa, 1.0, a_scale, a_scale / half, a_scale / (half * half), 1.0, 1.0 / half];
    let bg_params = vec![A0, A1, A2, PHI0, PHI1];
    let s1 = run_stage("background", &bw, &bz, seed, scale, bg_params, omega_ref, false, true, opts)?;

    // Stage 2: resonance on the background-divided trace.
    let bg = from_array(&s1.params, omega_ref);
    let corrected: Vec<Complex64> = omega.iter().zip(&data).map(|(&w, z)| z / bg.background(w)).collect();
    let k0 = (0..omega.len()).min_by(|&a, &b| (omega[a] - pre.omega0).abs().total_cmp(&(omega[b] - pre.omega0).abs())).unwrap();
    let pull = 1.0 - corrected[k0];
    let ratio = (pull.norm() / 2.0).clamp(0.02, 0.98);
    // The dip alone cannot tell under- from overcoupling; start from both
    // readings and a few spreads, keeping the best.
    let mut starts = Vec::new();
    let mut last_err = None;
    for r in [ratio, 1.0 - ratio, 0.25, 0.5, 0.75] {
        let mut seed2 = s1.params;
        seed2[KAPPA_EXT] = r * pre.kappa;
        seed2[KAPPA_INT] = (1.0 - r) * pre.kappa;
        seed2[THETA] = pull.arg();
        let res_params = vec![OMEGA0, KAPPA_INT, KAPPA_EXT, THETA];
        match run_stage("resonance", &omega, &corrected, seed2, scale, res_params, omega_ref, true, false, opts) {
            Ok(st) => starts.push(st),
            Err(e) => last_err = Some(e),
        }
    }
    // Physical solutions first, then the lowest residual.
    let rank = |st: &StageOutcome| (st.params[KAPPA_INT] < 0.0 || st.params[KAPPA_EXT] <= 0.0, st.rss);
    let s2 = match starts.into_iter().min_by(|a, b| rank(a).partial_cmp(&rank(b)).unwrap_or(std::cmp::Ordering::Equal)) {
        Some(st) => st,
        None => return Err(last_err.expect("every start failed")),
    };

    // Stage 3: everything, on the raw samples.
    let mut seed3 = s1.params;
    for k in [OMEGA0, KAPPA_INT, KAPPA_EXT, THETA] {
        seed3[k] = s2.params[k];
    }
    let kappa = seed3[KAPPA_INT] + seed3[KAPPA_EXT];
    if kappa > 0.0 {
        for k in [OMEGA0, KAPPA_INT, KAPPA_EXT] {
            scale[k] = kappa;
        }
    }
    let s3 = run_stage("joint", &omega, &data, seed3, scale, (0..N).collect(), omega_ref, true, true, opts)?;

    let m = 2 * omega.len();
    let dof = (m - N).max(1) as f64;
    let sigma2 = s3.rss / dof;
    let jtj = s3.jacobian.transpose() * &s3.jacobian;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::FitFailed { stage: "joint", reason: "singular normal matrix".into() })?;
    let se = |k: usize| (sigma2 * cov[(k, k)]).max(0.0).sqrt() * scale[k];
    let errors = ParamErrors {
        omega0: se(OMEGA0),
        kappa_int: se(KAPPA_INT),
        kappa_ext: se(KAPPA_EXT),
        theta: se(THETA),
        a0: se(A0),
        a1: se(A1),
        a2: se(A2),
        phi0: se(PHI0),
        phi1: se(PHI1),
    };
    let mut params = from_array(&s3.params, omega_ref);
    params.theta = wrap_angle(params.theta);

    // Linewidths must be non-negative; allow noise-level excursions to clamp.
    for (v, e, name) in [(&mut params.kappa_int, errors.kappa_int, "kappa_int"), (&mut params.kappa_ext, errors.kappa_ext, "kappa_ext")] {
        if *v < 0.0 {
            if *v > -3.0 * e {
                *v = 0.0;
            } else {
                return Err(Error::FitFailed { stage: "joint", reason: format!("{name} = {v:e} is negative") });
            }
        }
    }
    let (lo, hi) = trace.span();
    if !(params.omega0 > lo && params.omega0 < hi) {
        return Err(Error::FitFailed { stage: "joint", reason: "resonance outside the trace".into() });
    }

    Ok(FitResult {
        params,
        errors,
        residual_norm: s3.rss.sqrt(),
        sigma_hat: sigma2.sqrt(),
        samples: omega.len(),
        preliminary: pre,
        stages: vec![s1.report, s2.report, s3.report],
    })
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Divides out the fitted background and undoes the θ rotation, leaving
/// `1 - 2κ_ext/(κ + 2i(ω - ω0))`, which is `-ideal_response`.
pub fn background_correct(trace: &S11Trace, fit: &FitResult) -> Result<S11Trace> {
    background_correct_with(trace, &fit.params)
}

/// [`background_correct`] with explicit model parameters.
pub fn background_correct_with(trace: &S11Trace, p: &ResonanceParams) -> Result<S11Trace> {
    let rot = Complex64::from_polar(1.0, -p.theta);
    let s11 = trace.omega.iter().zip(&trace.s11).map(|(&w, z)| 1.0 - (1.0 - z / p.background(w)) * rot).collect();
    let mut out = S11Trace::new(trace.omega.clone(), s11)?;
    out.noise_sigma = trace.noise_sigma;
    Ok(out)
}
