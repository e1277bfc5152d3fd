//! Design and analysis toolkit for superconducting on-chip microwave cavities
//! coupled to Rydberg atoms held in an optical dipole trap above the chip.
//!
//! The pipeline runs from trap physics and the laser-exposure budget, through
//! electrostatic field maps of the capacitor cross-section and a
//! transmission-line resonator model, to coupling-rate sweeps and fitting of
//! measured reflection spectra.
//!
//! The analytic modules ([`beam_trap`], [`exposure`], [`circuit`]) are generic
//! over the floating-point type via [`Scalar`]; the numerical solvers
//! ([`fieldsolve`], [`optimize`], [`resfit`]) work in `f64`. Concrete aliases
//! for both precisions are exported at the crate root.

pub mod beam_trap;
pub mod circuit;
pub mod config;
pub mod constants;
pub mod error;
pub mod exposure;
pub mod fieldsolve;
pub mod optimize;
pub mod quadrature;
pub mod resfit;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GaussianBeam = beam_trap::GaussianBeam<f64>;
pub type GaussianBeam32 = beam_trap::GaussianBeam<f32>;
pub type AtomicSpecies = beam_trap::AtomicSpecies<f64>;
pub type AtomicSpecies32 = beam_trap::AtomicSpecies<f32>;
pub type AtomCloud = beam_trap::AtomCloud<f64>;
pub type AtomCloud32 = beam_trap::AtomCloud<f32>;
pub type CpwLine = circuit::CpwLine<f64>;
pub type CpwLine32 = circuit::CpwLine<f32>;
pub type ResonatorModel = circuit::ResonatorModel<f64>;
pub type ResonatorModel32 = circuit::ResonatorModel<f32>;
pub type CouplingResult = circuit::CouplingResult<f64>;
pub type ExposureBudget = exposure::ExposureBudget<f64>;

pub use fieldsolve::{ChipCrossSection, FieldMap, GridSpec, SolverSettings};
pub use resfit::{FitResult, S11Trace};
