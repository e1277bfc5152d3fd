//! Reflection models of a shunt-coupled resonator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result};

/// Ideal reflection `-1 + 2κ_ext / (κ + 2i(ω - ω0))` with `κ = κ_int + κ_ext`.
pub fn ideal_response(omega0: f64, kappa_int: f64, kappa_ext: f64, omega: f64) -> Complex64 {
    let d = Complex64::new(kappa_int + kappa_ext, 2.0 * (omega - omega0));
    -1.0 + 2.0 * kappa_ext / d
}

/// Full measurement model: resonance, interference angle `θ` and a smooth
/// complex background.
///
/// The background polynomial and phase ramp are expanded about `omega_ref`
/// (`Δ = ω - ω_ref`) to keep the fit well conditioned; `omega_ref = 0` gives
/// the plain polynomial in `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceParams {
    pub omega0: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
    pub theta: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub omega_ref: f64,
}

impl ResonanceParams {
    /// Resonance with a flat unit background and `θ = 0`.
    pub fn ideal(omega0: f64, kappa_int: f64, kappa_ext: f64) -> Self {
        Self {
            omega0,
            kappa_int,
            kappa_ext,
            theta: 0.0,
            a0: 1.0,
            a1: 0.0,
            a2: 0.0,
            phi0: 0.0,
            phi1: 0.0,
            omega_ref: omega0,
        }
    }

    /// From `ω0` and the two quality factors.
    pub fn from_quality(omega0: f64, q_int: f64, q_ext: f64) -> Result<Self> {
        ensure_positive("omega0", omega0)?;
        ensure_positive("q_int", q_int)?;
        ensure_positive("q_ext", q_ext)?;
        Ok(Self::ideal(omega0, omega0 / q_int, omega0 / q_ext))
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }

    pub fn q_int(&self) -> f64 {
        self.omega0 / self.kappa_int
    }

    pub fn q_ext(&self) -> f64 {
        self.omega0 / self.kappa_ext
    }

    /// Background `(a0 + a1Δ + a2Δ²) e^{i(φ0 + φ1Δ)}`.
    pub fn background(&self, omega: f64) -> Complex64 {
        let d = omega - self.omega_ref;
        let amp = self.a0 + d * (self.a1 + d * self.a2);
        Complex64::from_polar(amp, self.phi0 + self.phi1 * d)
    }

    /// Same model with the background re-expanded about `omega_ref`.
    pub fn rebased(&self, omega_ref: f64) -> Self {
        let d = omega_ref - self.omega_ref;
        Self {
            a0: self.a0 + d * (self.a1 + d * self.a2),
            a1: self.a1 + 2.0 * d * self.a2,
            phi0: self.phi0 + self.phi1 * d,
            omega_ref,
            ..*self
        }
    }

    /// Resonant factor `1 - 2κ_ext e^{iθ} / (κ + 2i(ω - ω0))`.
    pub fn resonance(&self, omega: f64) -> Complex64 {
        let d = Complex64::new(self.kappa(), 2.0 * (omega - self.omega0));
        1.0 - 2.0 * self.kappa_ext * Complex64::from_polar(1.0, self.theta) / d
    }
}

/// `S11(ω)` of the full model.
pub fn model_response(p: &ResonanceParams, omega: f64) -> Complex64 {
    p.background(omega) * p.resonance(omega)
}

/// `|S11|` in dB at resonance for the ideal response, `20 log10 |1 - 2κ_ext/κ|`.
pub fn dip_depth_db(kappa_int: f64, kappa_ext: f64) -> f64 {
    20.0 * (1.0 - 2.0 * kappa_ext / (kappa_int + kappa_ext)).abs().log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_and_overcoupled_limits() {
        let w0 = 7e10;
        assert!(ideal_response(w0, 1e6, 1e6, w0).norm() < 1e-15);
        assert!((ideal_response(w0, 0.0, 1e6, w0) - 1.0).norm() < 1e-15);
        assert!((ideal_response(w0, 1e6, 1e6, w0 + 1e12) + 1.0).norm() < 1e-5);
    }

    #[test]
    fn plain_model_is_minus_ideal() {
        let p = ResonanceParams::ideal(7e10, 2e6, 1e6);
        for k in -5..=5 {
            let w = p.omega0 + k as f64 * 1e6;
            assert!((model_response(&p, w) + ideal_response(p.omega0, p.kappa_int, p.kappa_ext, w)).norm() < 1e-15);
        }
    }

    #[test]
    fn measured_quality_factors_give_five_db() {
        let db = dip_depth_db(1.0 / 5.2e3, 1.0 / 18.3e3);
        assert!((db + 5.0).abs() < 0.5, "{db}");
    }
}
