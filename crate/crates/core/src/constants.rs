//! Physical constants (SI, CODATA 2018 exact or recommended values).

/// Vacuum speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit (kg).
pub const DALTON: f64 = 1.660_539_066_60e-27;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Atomic unit of electric dipole moment, `e a0` (C m).
pub const EA0: f64 = ELEMENTARY_CHARGE * BOHR_RADIUS;

/// Transition dipole moment of the 59P3/2 -> 58D5/2 (mj = 3/2) Rydberg pair
/// at the 11 GHz tuning point (C m).
pub const RYDBERG_DIPOLE_DEFAULT: f64 = 1898.0 * EA0;

pub const TWO_PI: f64 = std::f64::consts::TAU;
