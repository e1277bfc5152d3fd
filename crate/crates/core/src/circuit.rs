//! Resonator circuit model.
//!
//! The inductive wire of length `s` is split into a short-ended CPW section of
//! length `s̃ = s - q` and a lumped inductor `L0`. The CPW section modifies
//! the resonance condition and adds a standing-wave capacitance on top of the
//! plate capacitance `C0`.

use crate::constants::{HBAR, RYDBERG_DIPOLE_DEFAULT};
use crate::error::{ensure_positive, Error, Result};
use crate::Scalar;

/// Relative tolerance on `Z1 · v · C' = 1`.
pub const LINE_CONSISTENCY_TOL: f64 = 0.05;

/// Minimum distance of `s̃` from the quarter-wave pole, in wavelengths.
pub const POLE_MARGIN: f64 = 1e-3;

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    ensure_positive(name, v.as_f64())
}

/// Coplanar section of the inductive wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpwLine<T> {
    capacitance_per_length: T,
    impedance: T,
    phase_velocity: T,
}

impl<T: Scalar> CpwLine<T> {
    /// Validates `Z1 = 1/(v C')` to within [`LINE_CONSISTENCY_TOL`]; the rounded
    /// design constants (56 pF/m, 135 Ω, 1.28e8 m/s) only agree to about 3%.
    pub fn new(capacitance_per_length: T, impedance: T, phase_velocity: T) -> Result<Self> {
        check_positive("capacitance_per_length", capacitance_per_length)?;
        check_positive("impedance", impedance)?;
        check_positive("phase_velocity", phase_velocity)?;
        let product = (impedance * phase_velocity * capacitance_per_length).as_f64();
        if (product - 1.0).abs() > LINE_CONSISTENCY_TOL {
            return Err(Error::InvalidParameter {
                name: "impedance",
                reason: format!("Z1 v C' = {product:.4}, expected 1 within {LINE_CONSISTENCY_TOL}"),
            });
        }
        Ok(Self { capacitance_per_length, impedance, phase_velocity })
    }

    /// Line with its impedance derived exactly from `C'` and `v`.
    pub fn from_capacitance(capacitance_per_length: T, phase_velocity: T) -> Result<Self> {
        check_positive("capacitance_per_length", capacitance_per_length)?;
        check_positive("phase_velocity", phase_velocity)?;
        Ok(Self {
            capacitance_per_length,
            impedance: T::one() / (phase_velocity * capacitance_per_length),
            phase_velocity,
        })
    }

    /// 56 pF/m, 135 Ω, 1.28e8 m/s (sapphire, ε_eff = 5.5).
    pub fn design_default() -> Self {
        Self {
            capacitance_per_length: T::lit(56e-12),
            impedance: T::lit(135.0),
            phase_velocity: T::lit(1.28e8),
        }
    }

    pub fn capacitance_per_length(&self) -> T {
        self.capacitance_per_length
    }
    pub fn impedance(&self) -> T {
        self.impedance
    }
    pub fn phase_velocity(&self) -> T {
        self.phase_velocity
    }

    /// Inductance per length `Z1 / v`.
    pub fn inductance_per_length(&self) -> T {
        self.impedance / self.phase_velocity
    }

    /// Guided wavelength at angular frequency `omega`.
    pub fn wavelength(&self, omega: T) -> T {
        T::lit(2.0) * T::PI() * self.phase_velocity / omega
    }

    /// Electrical length `2π s̃/λ` of a section.
    pub fn electrical_length(&self, s_tilde: T, omega: T) -> T {
        omega * s_tilde / self.phase_velocity
    }
}

fn check_pole<T: Scalar>(s_tilde: T, wavelength: T) -> Result<()> {
    let quarter = wavelength / T::lit(4.0);
    let margin = T::lit(POLE_MARGIN) * wavelength;
    if (s_tilde - quarter).abs() <= margin || s_tilde > quarter {
        return Err(Error::NearQuarterWavePole {
            s_tilde: s_tilde.as_f64(),
            quarter_wave: quarter.as_f64(),
            margin: margin.as_f64(),
        });
    }
    Ok(())
}

/// Signed input reactance `Z1 tan(2π s̃/λ)` of a short-ended line.
pub fn cpw_input_impedance<T: Scalar>(z1: T, s_tilde: T, wavelength: T) -> Result<T> {
    if !(s_tilde >= T::zero()) {
        return Err(Error::InvalidParameter { name: "s_tilde", reason: "must be >= 0".into() });
    }
    check_positive("wavelength", wavelength)?;
    check_pole(s_tilde, wavelength)?;
    Ok(z1 * (T::lit(2.0) * T::PI() * s_tilde / wavelength).tan())
}

/// Standing-wave capacitance of the CPW section seen from the plate.
pub fn cpw_capacitance_correction<T: Scalar>(line: &CpwLine<T>, s_tilde: T, omega0: T, c0: T) -> Result<T> {
    if !(s_tilde >= T::zero()) {
        return Err(Error::InvalidParameter { name: "s_tilde", reason: "must be >= 0".into() });
    }
    check_positive("omega0", omega0)?;
    let lambda = line.wavelength(omega0);
    check_pole(s_tilde, lambda)?;
    let x = line.electrical_length(s_tilde, omega0);
    let k = omega0 * c0 * line.impedance();
    let four_pi = T::lit(4.0) * T::PI();
    // s̃ - λ/4π sin(2x) loses all digits for small x; use the series there.
    let bracket = if x < T::lit(1e-2) {
        let x2 = x * x;
        let series = T::lit(2.0) / T::lit(3.0) * x2 * x
            * (T::one() - x2 / T::lit(5.0) + T::lit(2.0) * x2 * x2 / T::lit(105.0));
        series * lambda / (T::lit(2.0) * T::PI())
    } else {
        s_tilde - lambda / four_pi * (T::lit(2.0) * x).sin()
    };
    let cos = x.cos();
    Ok(k * k * line.capacitance_per_length() * bracket / (T::lit(2.0) * cos * cos))
}

/// `C = C_dc - C' s̃ + C_CPW`.
pub fn effective_capacitance<T: Scalar>(c_dc: T, c_prime: T, s_tilde: T, c_cpw: T) -> Result<T> {
    let c0 = c_dc - c_prime * s_tilde;
    if !(c0 > T::zero()) {
        return Err(Error::NegativePlateCapacitance { c_dc: c_dc.as_f64(), line: (c_prime * s_tilde).as_f64() });
    }
    Ok(c0 + c_cpw)
}

/// Lumped-plus-line resonator description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorModel<T> {
    /// Plate-to-ground capacitance `C0`.
    pub plate_capacitance: T,
    pub line: CpwLine<T>,
    /// Lumped inductance `L0` of the non-CPW wire part.
    pub lumped_inductance: T,
    /// Total wire length `s`.
    pub wire_length: T,
    /// Non-CPW wire length `q`.
    pub lumped_length: T,
    /// Shunt coupler `C_s`, if known.
    pub shunt_capacitance: Option<T>,
    /// Feedline impedance `Z0`.
    pub feed_impedance: T,
}

/// Solved operating point of a [`ResonatorModel`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResonatorSolution<T> {
    pub omega0: T,
    pub wire_length: T,
    pub s_tilde: T,
    pub wavelength: T,
    pub cpw_capacitance: T,
    /// Effective capacitance `C = C0 + C_CPW`.
    pub capacitance: T,
    /// `L = 1/(ω0² C)`.
    pub inductance: T,
}

impl<T: Scalar> ResonatorModel<T> {
    /// Model with the design-default line, `L0 = 0.7 nH`, `q = 400 µm`, `Z0 = 50 Ω`.
    pub fn new(plate_capacitance: T, wire_length: T) -> Result<Self> {
        let m = Self {
            plate_capacitance,
            line: CpwLine::design_default(),
            lumped_inductance: T::lit(0.7e-9),
            wire_length,
            lumped_length: T::lit(400e-6),
            shunt_capacitance: None,
            feed_impedance: T::lit(50.0),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("plate_capacitance", self.plate_capacitance)?;
        check_positive("feed_impedance", self.feed_impedance)?;
        if !(self.lumped_inductance >= T::zero()) {
            return Err(Error::InvalidParameter { name: "lumped_inductance", reason: "must be >= 0".into() });
        }
        if !(self.lumped_length >= T::zero()) {
            return Err(Error::InvalidParameter { name: "lumped_length", reason: "must be >= 0".into() });
        }
        if !(self.wire_length >= self.lumped_length) {
            return Err(Error::InvalidParameter {
                name: "wire_length",
                reason: format!("s = {} must be at least q = {}", self.wire_length, self.lumped_length),
            });
        }
        if let Some(cs) = self.shunt_capacitance {
            check_positive("shunt_capacitance", cs)?;
        }
        Ok(())
    }

    pub fn with_wire_length(mut self, s: T) -> Result<Self> {
        self.wire_length = s;
        self.validate()?;
        Ok(self)
    }

    pub fn s_tilde(&self) -> T {
        self.wire_length - self.lumped_length
    }

    /// `1/√(L0 C0)`, the limit without a CPW section.
    pub fn lumped_frequency(&self) -> T {
        T::one() / (self.lumped_inductance * self.plate_capacitance).sqrt()
    }

    /// Residual of the resonance condition, in ohms.
    pub fn resonance_residual(&self, omega: T) -> T {
        let x = self.line.electrical_length(self.s_tilde(), omega);
        self.line.impedance() * x.tan() - T::one() / (omega * self.plate_capacitance) + omega * self.lumped_inductance
    }

    /// Lowest resonance `ω0` of the model.
    pub fn resonance_frequency(&self) -> Result<T> {
        resonance_frequency(self)
    }

    /// Resonance plus the derived capacitance and inductance.
    pub fn solve(&self) -> Result<ResonatorSolution<T>> {
        let omega0 = self.resonance_frequency()?;
        self.solution_at(omega0)
    }

    fn solution_at(&self, omega0: T) -> Result<ResonatorSolution<T>> {
        let s_tilde = self.s_tilde();
        let c_cpw = cpw_capacitance_correction(&self.line, s_tilde, omega0, self.plate_capacitance)?;
        let c = self.plate_capacitance + c_cpw;
        Ok(ResonatorSolution {
            omega0,
            wire_length: self.wire_length,
            s_tilde,
            wavelength: self.line.wavelength(omega0),
            cpw_capacitance: c_cpw,
            capacitance: c,
            inductance: T::one() / (omega0 * omega0 * c),
        })
    }

    /// Total capacitance seen by the feedline, `(1/C + 1/C_s)⁻¹`.
    pub fn total_capacitance(&self, c: T) -> Option<T> {
        self.shunt_capacitance.map(|cs| T::one() / (T::one() / c + T::one() / cs))
    }
}

/// Bisection on the monotone resonance residual, then Newton polish.
pub fn resonance_frequency<T: Scalar>(model: &ResonatorModel<T>) -> Result<T> {
    model.validate()?;
    let s_tilde = model.s_tilde();
    let c0 = model.plate_capacitance;
    let l0 = model.lumped_inductance;
    let z1 = model.line.impedance();
    let v = model.line.phase_velocity();
    let two = T::lit(2.0);

    let upper = if s_tilde > T::zero() {
        T::lit(0.999) * T::PI() * v / (two * s_tilde)
    } else if l0 > T::zero() {
        two * model.lumped_frequency()
    } else {
        return Err(Error::NoResonance("no inductance: s = q and L0 = 0".into()));
    };
    let f = |w: T| model.resonance_residual(w);
    if !(f(upper) > T::zero()) {
        return Err(Error::NoResonance(format!("residual does not change sign below {upper} rad/s")));
    }
    // f -> -inf as w -> 0; find a lower bracket by decades.
    let mut lo = upper;
    for _ in 0..60 {
        lo = lo / T::lit(10.0);
        if f(lo) < T::zero() {
            break;
        }
    }
    if !(f(lo) < T::zero()) {
        return Err(Error::NoResonance("no lower bracket".into()));
    }
    let mut hi = upper;
    let eps = T::epsilon() * T::lit(4.0);
    for _ in 0..400 {
        let mid = (lo + hi) / two;
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= eps * hi {
            break;
        }
    }
    let mut w = (lo + hi) / two;
    for _ in 0..4 {
        let x = w * s_tilde / v;
        let sec = T::one() / x.cos();
        let d = z1 * s_tilde / v * sec * sec + T::one() / (w * w * c0) + l0;
        let next = w - f(w) / d;
        if !(next > lo && next < hi) {
            break;
        }
        w = next;
    }
    Ok(w)
}

/// Wire length `s` that puts the resonance at `target` (closed form).
///
/// The reachable range is `(0, 1/√(L0 C0))`: the line section can only
/// lower the frequency.
pub fn solve_wire_length<T: Scalar>(model: &ResonatorModel<T>, target: T) -> Result<T> {
    check_positive("target", target)?;
    let c0 = model.plate_capacitance;
    check_positive("plate_capacitance", c0)?;
    let rhs = T::one() / (target * c0) - target * model.lumped_inductance;
    let max = model.lumped_frequency();
    if !(rhs > T::zero()) {
        return Err(Error::TargetUnreachable { target: target.as_f64(), min: 0.0, max: max.as_f64() });
    }
    let v = model.line.phase_velocity();
    let s_tilde = v / target * (rhs / model.line.impedance()).atan();
    check_pole(s_tilde, model.line.wavelength(target))?;
    Ok(s_tilde + model.lumped_length)
}

/// Model with its wire length set for `target`, already solved.
pub fn design_for_frequency<T: Scalar>(model: &ResonatorModel<T>, target: T) -> Result<ResonatorSolution<T>> {
    let s = solve_wire_length(model, target)?;
    let m = model.with_wire_length(s)?;
    m.solution_at(target)
}

/// Zero-point voltage and field for a per-volt field ratio `field_per_volt` (1/m).
pub fn zero_point_field<T: Scalar>(omega0: T, capacitance: T, field_per_volt: T) -> Result<(T, T)> {
    check_positive("omega0", omega0)?;
    check_positive("capacitance", capacitance)?;
    // ħω/2C ~ 1e-11 V²; the ratio is formed before the small ħ enters f32.
    let v_zpf = (T::lit(HBAR) * (omega0 / (T::lit(2.0) * capacitance))).sqrt();
    Ok((v_zpf, v_zpf * field_per_volt.abs()))
}

/// `g = E_zpf d0 / ħ`.
pub fn coupling_rate<T: Scalar>(e_zpf: T, d0: T) -> Result<T> {
    check_positive("d0", d0)?;
    // d0/ħ ~ 5e5 (C m / J s); keeps f32 in range.
    Ok(e_zpf * (d0 / T::lit(HBAR)))
}

/// Vacuum Rabi frequency `2g`.
pub fn vacuum_rabi_frequency<T: Scalar>(g: T) -> T {
    T::lit(2.0) * g
}

/// Collective Rabi frequency `√N · 2g`.
pub fn collective_rabi_frequency<T: Scalar>(g: T, rydberg_count: u64) -> T {
    T::lit(rydberg_count as f64).sqrt() * vacuum_rabi_frequency(g)
}

/// Vacuum field and coupling at one point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CouplingResult<T> {
    pub v_zpf: T,
    pub e_zpf: T,
    pub g: T,
    pub d0: T,
}

impl<T: Scalar> CouplingResult<T> {
    pub fn evaluate(omega0: T, capacitance: T, field_per_volt: T, d0: T) -> Result<Self> {
        let (v_zpf, e_zpf) = zero_point_field(omega0, capacitance, field_per_volt)?;
        Ok(Self { v_zpf, e_zpf, g: coupling_rate(e_zpf, d0)?, d0 })
    }

    /// With the default Rydberg pair dipole, 1898 e a0.
    pub fn with_default_dipole(omega0: T, capacitance: T, field_per_volt: T) -> Result<Self> {
        Self::evaluate(omega0, capacitance, field_per_volt, T::lit(RYDBERG_DIPOLE_DEFAULT))
    }
}

/// Quality factors and linewidths of the shunt-coupled resonator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QualityFactors<T> {
    /// Design formula `ω0 Z0 C_s (C + C_s) / C`.
    pub q_ext: T,
    pub q_int: T,
    pub kappa_int: T,
    pub kappa_ext: T,
}

/// `κ_int = ω0² R C_tot`, `κ_ext = C_tot / (Z0 C_s²)`.
pub fn quality_factors<T: Scalar>(omega0: T, c: T, c_s: T, z0: T, r: T) -> Result<QualityFactors<T>> {
    check_positive("omega0", omega0)?;
    check_positive("capacitance", c)?;
    check_positive("shunt_capacitance", c_s)?;
    check_positive("feed_impedance", z0)?;
    if !(r >= T::zero()) {
        return Err(Error::InvalidParameter { name: "resistance", reason: "must be >= 0".into() });
    }
    let c_tot = T::one() / (T::one() / c + T::one() / c_s);
    let kappa_int = omega0 * omega0 * r * c_tot;
    let kappa_ext = c_tot / (z0 * c_s * c_s);
    Ok(QualityFactors {
        q_ext: omega0 * z0 * c_s * (c + c_s) / c,
        q_int: omega0 / kappa_int,
        kappa_int,
        kappa_ext,
    })
}

/// Least-squares line through `(s, L)` evaluated at `s = at`.
pub fn extrapolate_inductance<T: Scalar>(points: &[(T, T)], at: T) -> Result<T> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter { name: "points", reason: "need at least two (s, L) pairs".into() });
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.as_f64(), b + y.as_f64()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        let dx = x.as_f64() - mx;
        sxx += dx * dx;
        sxy += dx * (y.as_f64() - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter { name: "points", reason: "all s values coincide".into() });
    }
    let slope = sxy / sxx;
    Ok(T::lit(my + slope * (at.as_f64() - mx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const OMEGA_11: f64 = 2.0 * PI * 11e9;

    fn model() -> ResonatorModel<f64> {
        ResonatorModel::new(150e-15, 1.0e-3).unwrap()
    }

    #[test]
    fn design_line_is_consistent() {
        let l = CpwLine::<f64>::design_default();
        let p = l.impedance() * l.phase_velocity() * l.capacitance_per_length();
        assert!((p - 1.0).abs() < LINE_CONSISTENCY_TOL);
        assert!(CpwLine::<f64>::new(56e-12, 200.0, 1.28e8).is_err());
        assert_relative_eq!(l.wavelength(OMEGA_11), 11.636e-3, max_relative = 1e-3);
    }

    #[test]
    fn input_impedance_reference_values() {
        assert_eq!(cpw_input_impedance(135.0, 0.0, 11.6e-3).unwrap(), 0.0);
        assert_relative_eq!(cpw_input_impedance(135.0, 11.6e-3 / 8.0, 11.6e-3).unwrap(), 135.0, max_relative = 1e-12);
        let z = cpw_input_impedance(135.0, 1.4e-3, 11.6e-3).unwrap();
        assert_relative_eq!(z, 135.0 * (0.758_33f64).tan(), max_relative = 1e-4);
        assert!(matches!(
            cpw_input_impedance(135.0, 11.6e-3 / 4.0, 11.6e-3),
            Err(Error::NearQuarterWavePole { .. })
        ));
    }

    #[test]
    fn correction_matches_energy_quadrature() {
        let line = CpwLine::<f64>::design_default();
        let c0 = 150e-15;
        let lambda = line.wavelength(OMEGA_11);
        let gl = GaussLegendre::new(40);
        for s in [0.05e-3, 0.6e-3, 1.4e-3, 2.5e-3] {
            let x = line.electrical_length(s, OMEGA_11);
            let v0 = 1.0;
            let v1 = v0 * OMEGA_11 * c0 * line.impedance() * x.tan();
            let v_lambda = v1 / x.sin();
            let energy = 0.5
                * line.capacitance_per_length()
                * v_lambda
                * v_lambda
                * gl.integrate(0.0, s, |t| (2.0 * PI * t / lambda).sin().powi(2));
            let c = cpw_capacitance_correction(&line, s, OMEGA_11, c0).unwrap();
            assert_relative_eq!(0.5 * c * v0 * v0, energy, max_relative = 1e-8);
        }
        assert_eq!(cpw_capacitance_correction(&line, 0.0, OMEGA_11, c0).unwrap(), 0.0);
    }

    #[test]
    fn lumped_limit() {
        let m = ResonatorModel::new(150e-15, 400e-6).unwrap();
        let w = m.resonance_frequency().unwrap();
        assert_relative_eq!(w, m.lumped_frequency(), max_relative = 1e-12);
        let tiny = m.with_wire_length(400e-6 + 1e-12).unwrap();
        assert_relative_eq!(tiny.resonance_frequency().unwrap(), m.lumped_frequency(), max_relative = 1e-6);
    }

    #[test]
    fn wire_length_roundtrip() {
        let m = model();
        let s = solve_wire_length(&m, OMEGA_11).unwrap();
        let w = m.with_wire_length(s).unwrap().resonance_frequency().unwrap();
        assert_relative_eq!(w, OMEGA_11, max_relative = 1e-10);
    }

    #[test]
    fn longer_wire_lowers_frequency() {
        let m = model();
        let w1 = m.resonance_frequency().unwrap();
        let w2 = m.with_wire_length(1.2e-3).unwrap().resonance_frequency().unwrap();
        assert!(w2 < w1);
    }

    #[test]
    fn larger_plate_needs_shorter_wire() {
        let m1 = ResonatorModel::new(120e-15, 1e-3).unwrap();
        let m2 = ResonatorModel::new(160e-15, 1e-3).unwrap();
        assert!(solve_wire_length(&m2, OMEGA_11).unwrap() < solve_wire_length(&m1, OMEGA_11).unwrap());
    }

    #[test]
    fn unreachable_target_reports_range() {
        let m = model();
        let e = solve_wire_length(&m, 2.0 * m.lumped_frequency()).unwrap_err();
        assert!(matches!(e, Error::TargetUnreachable { .. }));
    }

    #[test]
    fn residual_is_tiny_at_root() {
        let m = model();
        let w = m.resonance_frequency().unwrap();
        let scale = 1.0 / (w * m.plate_capacitance);
        assert!(m.resonance_residual(w).abs() < 1e-9 * scale);
    }

    #[test]
    fn solution_inductance_consistency() {
        let sol = model().solve().unwrap();
        assert_relative_eq!(sol.inductance * sol.omega0 * sol.omega0 * sol.capacitance, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn straight_wire_subtraction() {
        // 56 pF/m over 0.6 mm is 33.6 fF
        let c = effective_capacitance(200e-15, 56e-12, 0.6e-3, 0.0).unwrap();
        assert_relative_eq!(200e-15 - c, 33.6e-15, max_relative = 1e-12);
        assert_eq!(effective_capacitance(200e-15, 56e-12, 0.0, 0.0).unwrap(), 200e-15);
        assert!(matches!(
            effective_capacitance(20e-15, 56e-12, 0.6e-3, 0.0),
            Err(Error::NegativePlateCapacitance { .. })
        ));
    }

    #[test]
    fn zero_point_voltage_reference() {
        let (v, e) = zero_point_field(OMEGA_11, 100e-15, 3700.0).unwrap();
        assert_relative_eq!(v, 6.04e-6, max_relative = 2e-3);
        assert_relative_eq!(e, v * 3700.0);
    }

    #[test]
    fn collective_scaling() {
        let g = 2.0 * PI * 400e3;
        assert_eq!(vacuum_rabi_frequency(g), 2.0 * g);
        assert_relative_eq!(collective_rabi_frequency(g, 9) / vacuum_rabi_frequency(g), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn quality_factor_forms_agree() {
        let q = quality_factors(OMEGA_11, 150e-15, 3e-12, 50.0, 0.0).unwrap();
        assert_eq!(q.kappa_int, 0.0);
        assert_relative_eq!(q.q_ext, OMEGA_11 / q.kappa_ext, max_relative = 1e-12);
    }

    #[test]
    fn extrapolation_of_line() {
        let pts = [(0.6e-3, 1.0e-9), (0.8e-3, 1.2e-9), (1.0e-3, 1.4e-9)];
        assert_relative_eq!(extrapolate_inductance(&pts, 0.4e-3).unwrap(), 0.8e-9, max_relative = 1e-12);
    }

    #[test]
    fn single_precision_pipeline() {
        let m32 = ResonatorModel::<f32>::new(150e-15, 1e-3).unwrap();
        let m64 = model();
        let w32 = m32.resonance_frequency().unwrap() as f64;
        assert_relative_eq!(w32, m64.resonance_frequency().unwrap(), max_relative = 1e-5);
        let g32 = CouplingResult::<f32>::with_default_dipole(6.9e10, 1.5e-13, 3000.0).unwrap().g as f64;
        let g64 = CouplingResult::<f64>::with_default_dipole(6.9e10, 1.5e-13, 3000.0).unwrap().g;
        assert_relative_eq!(g32, g64, max_relative = 1e-5);
    }
}
