//! Laser exposure budget: Gaussian-tail power reaching the superconductor,
//! off-resonant scattering by the trapped atoms, and the inverse problems
//! (largest safe chip width, smallest plate distance).

use crate::beam_trap::{AtomicSpecies, GaussianBeam};
use crate::constants::{HBAR, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::Scalar;

/// Default acceptance threshold for the direct power, 0.1 nW.
pub const DEFAULT_POWER_LIMIT: f64 = 0.1e-9;

/// How many chip surfaces the beam tail can reach.
///
/// A planar chip sits below the beam only. In a flip-chip stack the beam passes
/// between two chips, so both Gaussian tails land on a superconductor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipSurfaces {
    #[default]
    Single,
    Double,
}

impl ChipSurfaces {
    fn factor(self) -> f64 {
        match self {
            ChipSurfaces::Single => 0.5,
            ChipSurfaces::Double => 1.0,
        }
    }
}

fn erfc<T: Scalar>(x: T) -> T {
    T::lit(libm::erfc(x.as_f64()))
}

/// Direct power on a single chip surface at height `z0` below the beam axis,
/// for a chip of width `l_ch` centred on the focus.
pub fn direct_power<T: Scalar>(beam: &GaussianBeam<T>, z0: T, l_ch: T) -> Result<T> {
    direct_power_on(beam, z0, l_ch, ChipSurfaces::Single)
}

/// Direct power summed over the given chip surfaces.
pub fn direct_power_on<T: Scalar>(beam: &GaussianBeam<T>, z0: T, l_ch: T, surfaces: ChipSurfaces) -> Result<T> {
    if !(z0 >= T::zero()) {
        return Err(Error::InvalidParameter { name: "z0", reason: "must be >= 0".into() });
    }
    if !(l_ch >= T::zero()) {
        return Err(Error::InvalidParameter { name: "l_ch", reason: "must be >= 0".into() });
    }
    let we = beam.radius(l_ch / T::lit(2.0));
    let x = T::SQRT_2() * z0 / we;
    Ok(T::lit(surfaces.factor()) * beam.power() * erfc(x))
}

/// Per-atom off-resonant scattering rate at the trap centre.
pub fn scattering_rate<T: Scalar>(beam: &GaussianBeam<T>, species: &AtomicSpecies<T>) -> Result<T> {
    scattering_rate_at(beam, species, beam.peak_intensity())
}

/// Scattering rate at a given intensity.
pub fn scattering_rate_at<T: Scalar>(beam: &GaussianBeam<T>, species: &AtomicSpecies<T>, intensity: T) -> Result<T> {
    let omega = beam.angular_frequency();
    for w in [species.d1_frequency, species.d2_frequency] {
        if ((w - omega) / w).abs() <= T::lit(1e-12) {
            return Err(Error::ResonantWavelength);
        }
    }
    let c = T::lit(SPEED_OF_LIGHT);
    let hbar = T::lit(HBAR);
    let term = |w: T, gamma: T, weight: T| {
        let cw = c / w;
        let ratio = omega / w;
        let s = gamma / (w - omega) + gamma / (w + omega);
        // c²/(ħω³) is ~1e-5 after the (c/w)² grouping; fine in f32.
        weight * T::PI() * (cw * cw / w) / hbar * ratio * ratio * ratio * s * s
    };
    let k = term(species.d1_frequency, species.d1_linewidth, T::lit(0.5))
        + term(species.d2_frequency, species.d2_linewidth, T::one());
    Ok(k * intensity)
}

/// Total scattered optical power `ħ ω Γ_sc N`.
pub fn scattered_power<T: Scalar>(beam: &GaussianBeam<T>, species: &AtomicSpecies<T>, atom_count: T) -> Result<T> {
    if !(atom_count >= T::zero()) {
        return Err(Error::InvalidParameter { name: "atom_count", reason: "must be >= 0".into() });
    }
    let gamma = scattering_rate(beam, species)?;
    Ok(T::lit(HBAR) * beam.angular_frequency() * gamma * atom_count)
}

/// Ratio `r_e = z0 / w_e` at which the direct power equals `p_limit`.
///
/// Bisection on `ln P` over `r ∈ [0, 10]`, 1e-6 relative. Returns zero when the
/// limit is at or above the unblocked share of the beam.
pub fn edge_ratio<T: Scalar>(beam: &GaussianBeam<T>, p_limit: T, surfaces: ChipSurfaces) -> Result<T> {
    if !(p_limit > T::zero()) {
        return Err(Error::InvalidParameter { name: "p_limit", reason: "must be > 0".into() });
    }
    let p = beam.power().as_f64();
    let target = (p_limit.as_f64() / (surfaces.factor() * p)).ln();
    // P_dir / (factor P) = erfc(√2 r)
    let f = |r: f64| libm::erfc(std::f64::consts::SQRT_2 * r).ln() - target;
    if f(0.0) <= 0.0 {
        return Ok(T::zero());
    }
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    if f(hi) > 0.0 {
        return Err(Error::InvalidParameter {
            name: "p_limit",
            reason: format!("limit {} W lies beyond ten beam radii", p_limit),
        });
    }
    while hi - lo > 1e-9 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5 * (lo + hi)))
}

/// Widest chip whose edge receives at most `p_limit`.
///
/// The edge radius grows along the beam as `w(l_ch/2)`, so the width follows
/// from `z0 = r_e · w(l_ch/2)`.
pub fn critical_chip_width<T: Scalar>(
    beam: &GaussianBeam<T>,
    z0: T,
    p_limit: T,
    surfaces: ChipSurfaces,
) -> Result<T> {
    let re = edge_ratio(beam, p_limit, surfaces)?;
    let ratio = z0 / (re * beam.waist());
    if !(ratio > T::one()) {
        return Err(Error::NoSafeWidth { ratio: (z0 / beam.waist()).as_f64(), edge_ratio: re.as_f64() });
    }
    Ok(T::lit(2.0) * beam.rayleigh_length() * (ratio * ratio - T::one()).sqrt())
}

/// Smallest flip-chip plate distance `2 r_e w_dp` at zero chip width.
pub fn min_plate_distance<T: Scalar>(beam: &GaussianBeam<T>, p_limit: T, surfaces: ChipSurfaces) -> Result<T> {
    Ok(T::lit(2.0) * edge_ratio(beam, p_limit, surfaces)? * beam.waist())
}

/// Exposure summary for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExposureBudget<T> {
    pub direct_power: T,
    pub scattering_rate: T,
    pub scattered_power: T,
    pub power_limit: T,
}

impl<T: Scalar> ExposureBudget<T> {
    pub fn evaluate(
        beam: &GaussianBeam<T>,
        species: &AtomicSpecies<T>,
        l_ch: T,
        atom_count: T,
        power_limit: T,
        surfaces: ChipSurfaces,
    ) -> Result<Self> {
        Ok(Self {
            direct_power: direct_power_on(beam, beam.focus_height(), l_ch, surfaces)?,
            scattering_rate: scattering_rate(beam, species)?,
            scattered_power: scattered_power(beam, species, atom_count)?,
            power_limit,
        })
    }

    pub fn within_limit(&self) -> bool {
        self.direct_power <= self.power_limit
    }
}

/// One row of the flip-chip parameter table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FlipChipRow {
    pub d: f64,
    pub a: f64,
    pub l: f64,
    pub l_ch: f64,
    pub l_ch_crit: f64,
}

/// Plate length rule: twice the plate width, at least 250 µm.
pub fn flipchip_plate_length(d: f64) -> f64 {
    (2.0 * d).max(250e-6)
}

/// Chip width at the laser crossing: plate length, plate width and 250 µm of taper padding.
pub fn flipchip_chip_width(d: f64) -> f64 {
    flipchip_plate_length(d) + d + 250e-6
}

/// Geometry and critical width for plate distance `d`, both chips exposed.
pub fn flipchip_row(beam: &GaussianBeam<f64>, d: f64, p_limit: f64) -> Result<FlipChipRow> {
    Ok(FlipChipRow {
        d,
        a: d,
        l: flipchip_plate_length(d),
        l_ch: flipchip_chip_width(d),
        l_ch_crit: critical_chip_width(beam, d / 2.0, p_limit, ChipSurfaces::Double)?,
    })
}
