//! Focused-Gaussian optical dipole trap: beam geometry, trap potential,
//! harmonic frequencies and the thermal cloud profile.
//!
//! Coordinates follow the chip frame: the beam propagates along `y`, the chip
//! surface is the plane `z = 0` and the focus sits at height `focus_height`
//! above it. Radial distance from the beam axis is `r = sqrt(x² + (z - z0)²)`.

use crate::constants::{BOLTZMANN, DALTON, SPEED_OF_LIGHT, TWO_PI};
use crate::error::{Error, Result};
use crate::Scalar;

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<T> {
    if v.is_finite() && v > T::zero() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite and > 0, got {v}") })
    }
}

/// Focused trapping beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam<T> {
    wavelength: T,
    waist: T,
    power: T,
    focus_height: T,
}

impl<T: Scalar> GaussianBeam<T> {
    pub fn new(wavelength: T, waist: T, power: T, focus_height: T) -> Result<Self> {
        Ok(Self {
            wavelength: positive("wavelength", wavelength)?,
            waist: positive("waist", waist)?,
            power: positive("power", power)?,
            focus_height: positive("focus_height", focus_height)?,
        })
    }

    /// 800 nm, 15 µm waist, 50 mW, focus 80 µm above the chip.
    pub fn standard() -> Self {
        Self {
            wavelength: T::lit(800e-9),
            waist: T::lit(15e-6),
            power: T::lit(50e-3),
            focus_height: T::lit(80e-6),
        }
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }
    pub fn waist(&self) -> T {
        self.waist
    }
    pub fn power(&self) -> T {
        self.power
    }
    pub fn focus_height(&self) -> T {
        self.focus_height
    }

    pub fn with_power(self, power: T) -> Result<Self> {
        Self::new(self.wavelength, self.waist, power, self.focus_height)
    }
    pub fn with_focus_height(self, z0: T) -> Result<Self> {
        Self::new(self.wavelength, self.waist, self.power, z0)
    }
    pub fn with_waist(self, waist: T) -> Result<Self> {
        Self::new(self.wavelength, waist, self.power, self.focus_height)
    }

    /// Laser angular frequency `2πc/λ`.
    pub fn angular_frequency(&self) -> T {
        T::lit(TWO_PI * SPEED_OF_LIGHT) / self.wavelength
    }

    /// `l_R = π w² / λ`.
    pub fn rayleigh_length(&self) -> T {
        T::PI() * self.waist * self.waist / self.wavelength
    }

    /// 1/e² radius at longitudinal offset `y` from the focus plane.
    pub fn radius(&self, y: T) -> T {
        let u = y / self.rayleigh_length();
        self.waist * (T::one() + u * u).sqrt()
    }

    /// On-axis intensity in the focus plane, `2P/(π w²)`.
    pub fn peak_intensity(&self) -> T {
        T::lit(2.0) * self.power / (T::PI() * self.waist * self.waist)
    }

    /// Intensity at radial distance `r` from the axis and offset `y`.
    pub fn intensity(&self, r: T, y: T) -> T {
        let w = self.radius(y);
        let two = T::lit(2.0);
        two * self.power / (T::PI() * w * w) * (-two * r * r / (w * w)).exp()
    }

    /// Intensity at a chip-frame position `(x, y, z)`.
    pub fn intensity_at(&self, x: T, y: T, z: T) -> T {
        let zt = z - self.focus_height;
        self.intensity((x * x + zt * zt).sqrt(), y)
    }
}

/// Two-line alkali atom entering the far-detuned dipole potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicSpecies<T> {
    pub mass: T,
    pub d1_frequency: T,
    pub d2_frequency: T,
    pub d1_linewidth: T,
    pub d2_linewidth: T,
}

impl<T: Scalar> AtomicSpecies<T> {
    pub fn new(mass: T, d1_frequency: T, d2_frequency: T, d1_linewidth: T, d2_linewidth: T) -> Result<Self> {
        positive("mass", mass)?;
        positive("d1_frequency", d1_frequency)?;
        positive("d1_linewidth", d1_linewidth)?;
        positive("d2_linewidth", d2_linewidth)?;
        if !(d2_frequency > d1_frequency) {
            return Err(Error::InvalidParameter {
                name: "d2_frequency",
                reason: "D2 line must lie above the D1 line".into(),
            });
        }
        Ok(Self { mass, d1_frequency, d2_frequency, d1_linewidth, d2_linewidth })
    }

    /// ⁸⁷Rb with line frequencies rounded to 377 THz / 384 THz.
    pub fn rubidium87() -> Self {
        Self {
            mass: T::lit(86.9 * DALTON),
            d1_frequency: T::lit(TWO_PI * 377e12),
            d2_frequency: T::lit(TWO_PI * 384e12),
            d1_linewidth: T::lit(TWO_PI * 5.75e6),
            d2_linewidth: T::lit(TWO_PI * 6.07e6),
        }
    }

    fn check_detuning(&self, omega: T) -> Result<()> {
        let tol = T::lit(1e-12);
        for w in [self.d1_frequency, self.d2_frequency] {
            if ((w - omega) / w).abs() <= tol {
                return Err(Error::ResonantWavelength);
            }
        }
        Ok(())
    }
}

/// Ratio `U/I` of the dipole potential to the local intensity (J per W/m²).
///
/// Both rotating and counter-rotating terms of the D1 and D2 lines are kept;
/// the D2 term carries the factor 2 from its line strength.
pub fn potential_per_intensity<T: Scalar>(species: &AtomicSpecies<T>, omega: T) -> Result<T> {
    species.check_detuning(omega)?;
    let c = T::lit(SPEED_OF_LIGHT);
    let term = |w: T, gamma: T, weight: T| {
        // (c/w)²/w keeps every intermediate inside the f32 range.
        let cw = c / w;
        -weight * T::PI() * cw * cw / w * (gamma / (w - omega) + gamma / (w + omega))
    };
    Ok(term(species.d1_frequency, species.d1_linewidth, T::lit(0.5))
        + term(species.d2_frequency, species.d2_linewidth, T::one()))
}

/// Dipole potential `U_dp` at chip-frame position `(x, y, z)`.
pub fn trap_potential<T: Scalar>(
    beam: &GaussianBeam<T>,
    species: &AtomicSpecies<T>,
    position: (T, T, T),
) -> Result<T> {
    let k = potential_per_intensity(species, beam.angular_frequency())?;
    let (x, y, z) = position;
    Ok(k * beam.intensity_at(x, y, z))
}

/// Potential at the trap centre (focus).
pub fn center_potential<T: Scalar>(beam: &GaussianBeam<T>, species: &AtomicSpecies<T>) -> Result<T> {
    Ok(potential_per_intensity(species, beam.angular_frequency())? * beam.peak_intensity())
}

/// Trap depth `|U0|` in kelvin.
pub fn trap_depth_kelvin<T: Scalar>(beam: &GaussianBeam<T>, species: &AtomicSpecies<T>) -> Result<T> {
    Ok(center_potential(beam, species)?.abs() / T::lit(BOLTZMANN))
}

/// Radial and longitudinal harmonic angular frequencies `(ω_r, ω_y)`.
pub fn oscillation_frequencies<T: Scalar>(
    beam: &GaussianBeam<T>,
    species: &AtomicSpecies<T>,
) -> Result<(T, T)> {
    let u0 = center_potential(beam, species)?;
    if !(u0 < T::zero()) {
        return Err(Error::NoTrap);
    }
    let depth = -u0;
    let w = beam.waist();
    let lr = beam.rayleigh_length();
    let wr = (T::lit(4.0) * depth / (species.mass * w * w)).sqrt();
    let wy = (T::lit(2.0) * depth / (species.mass * lr * lr)).sqrt();
    Ok((wr, wy))
}

/// Validity of the harmonic cloud description at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicRegime {
    /// `T < depth/10`.
    Harmonic,
    /// `depth/10 <= T <= depth`: usable, anharmonic corrections become visible.
    Marginal,
    /// `T > depth`.
    Invalid,
}

pub fn harmonic_regime<T: Scalar>(temperature: T, depth_kelvin: T) -> HarmonicRegime {
    if temperature > depth_kelvin {
        HarmonicRegime::Invalid
    } else if temperature > depth_kelvin / T::lit(10.0) {
        HarmonicRegime::Marginal
    } else {
        HarmonicRegime::Harmonic
    }
}

/// Thermal cloud in a harmonic trap: independent Gaussians radially and along the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomCloud<T> {
    pub sigma_r: T,
    pub sigma_y: T,
    pub temperature: T,
    pub atom_count: T,
}

impl<T: Scalar> AtomCloud<T> {
    pub fn new(sigma_r: T, sigma_y: T, temperature: T, atom_count: T) -> Result<Self> {
        positive("sigma_r", sigma_r)?;
        positive("sigma_y", sigma_y)?;
        if !(atom_count >= T::zero()) {
            return Err(Error::InvalidParameter { name: "atom_count", reason: "must be >= 0".into() });
        }
        Ok(Self { sigma_r, sigma_y, temperature, atom_count })
    }

    /// Radial extent, six standard deviations.
    pub fn diameter(&self) -> T {
        T::lit(6.0) * self.sigma_r
    }

    /// Longitudinal extent, six standard deviations.
    pub fn length(&self) -> T {
        T::lit(6.0) * self.sigma_y
    }

    /// Single-particle density `ρ_sp(r, y)`, normalised to one over all space.
    pub fn density(&self, r: T, y: T) -> T {
        let two = T::lit(2.0);
        let norm = (two * T::PI()).sqrt().powi(3) * self.sigma_r * self.sigma_r * self.sigma_y;
        (-(r * r) / (two * self.sigma_r * self.sigma_r) - y * y / (two * self.sigma_y * self.sigma_y)).exp() / norm
    }

    /// Density at an offset `(dx, dy, dz)` from the cloud centre.
    pub fn density_at(&self, dx: T, dy: T, dz: T) -> T {
        self.density((dx * dx + dz * dz).sqrt(), dy)
    }
}

/// Cloud profile for temperature `temperature` (K) and `atom_count` atoms.
///
/// Fails when the temperature exceeds the trap depth; logs a warning above a
/// tenth of the depth.
pub fn cloud_profile<T: Scalar>(
    beam: &GaussianBeam<T>,
    species: &AtomicSpecies<T>,
    temperature: T,
    atom_count: T,
) -> Result<AtomCloud<T>> {
    positive("temperature", temperature)?;
    let depth = trap_depth_kelvin(beam, species)?;
    match harmonic_regime(temperature, depth) {
        HarmonicRegime::Invalid => {
            return Err(Error::CloudTooHot { temperature: temperature.as_f64(), depth: depth.as_f64() })
        }
        HarmonicRegime::Marginal => log::warn!(
            "cloud temperature {} K is above a tenth of the trap depth {} K",
            temperature,
            depth
        ),
        HarmonicRegime::Harmonic => {}
    }
    let (wr, wy) = oscillation_frequencies(beam, species)?;
    // sqrt(kT/m) first: kT/m is O(1e-5) while kT alone underflows f32 precision.
    let thermal_velocity = (T::lit(BOLTZMANN) / species.mass * temperature).sqrt();
    AtomCloud::new(thermal_velocity / wr, thermal_velocity / wy, temperature, atom_count)
}
