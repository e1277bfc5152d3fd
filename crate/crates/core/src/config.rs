//! Project configuration file (TOML).
//!
//! Every section is optional and falls back to the reference design; within a
//! section that is present, all keys without a stated default are required.
//! Keys carry their SI unit as a suffix (`waist_m`, `power_w`, ...). Unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beam_trap::{AtomicSpecies, GaussianBeam};
use crate::circuit::CpwLine;
use crate::constants::{DALTON, EA0, TWO_PI};
use crate::error::{Error, Result};
use crate::exposure::{ChipSurfaces, DEFAULT_POWER_LIMIT};
use crate::fieldsolve::{ChipCrossSection, FlipChipLayout, GridSpec, PlanarLayout, SolverSettings};
use crate::optimize::SweepConfig;
use crate::resfit::{FitOptions, ResonanceParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub wavelength_m: f64,
    pub waist_m: f64,
    pub power_w: f64,
    pub focus_height_m: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { wavelength_m: 800e-9, waist_m: 15e-6, power_w: 50e-3, focus_height_m: 80e-6 }
    }
}

/// Either `name = "rb87"` or a full custom set of constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: Option<String>,
    pub mass_da: Option<f64>,
    pub d1_frequency_hz: Option<f64>,
    pub d2_frequency_hz: Option<f64>,
    pub d1_linewidth_hz: Option<f64>,
    pub d2_linewidth_hz: Option<f64>,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        Self {
            name: Some("rb87".into()),
            mass_da: None,
            d1_frequency_hz: None,
            d2_frequency_hz: None,
            d1_linewidth_hz: None,
            d2_linewidth_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    pub temperature_k: f64,
    pub atom_count: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self { temperature_k: 1e-6, atom_count: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureConfig {
    pub power_limit_w: f64,
    /// Chip width crossed by the beam, for the direct-power estimate.
    pub chip_width_m: f64,
    #[serde(default)]
    pub surfaces: ChipSurfaces,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self { power_limit_w: DEFAULT_POWER_LIMIT, chip_width_m: 1.6e-3, surfaces: ChipSurfaces::Single }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Planar,
    Flipchip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Plate width `a`.
    pub plate_width_m: f64,
    /// Planar gap `b`.
    #[serde(default)]
    pub gap_m: Option<f64>,
    /// Flip-chip plate distance `d`.
    #[serde(default)]
    pub plate_distance_m: Option<f64>,
    #[serde(default)]
    pub planar: PlanarLayout,
    #[serde(default)]
    pub flipchip: FlipChipLayout,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            kind: GeometryKind::Planar,
            plate_width_m: 120e-6,
            gap_m: Some(40e-6),
            plate_distance_m: None,
            planar: PlanarLayout::default(),
            flipchip: FlipChipLayout::default(),
        }
    }
}

impl GeometryConfig {
    pub fn cross_section(&self) -> Result<ChipCrossSection> {
        match self.kind {
            GeometryKind::Planar => {
                let b = self.gap_m.ok_or(missing("geometry.gap_m"))?;
                ChipCrossSection::planar(self.plate_width_m, b, &self.planar)
            }
            GeometryKind::Flipchip => {
                let d = self.plate_distance_m.ok_or(missing("geometry.plate_distance_m"))?;
                ChipCrossSection::flipchip(d, self.plate_width_m, &self.flipchip)
            }
        }
    }
}

fn missing(key: &'static str) -> Error {
    Error::InvalidParameter { name: key, reason: "required key is missing".into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub c_prime_f_per_m: f64,
    pub z1_ohm: f64,
    pub v_phase_m_per_s: f64,
    pub l0_h: f64,
    pub q_m: f64,
    pub z0_ohm: f64,
    /// Shunt coupler; no trusted default exists.
    #[serde(default)]
    pub c_s_f: Option<f64>,
    /// Transition dipole in units of `e a0`.
    pub d0_ea0: f64,
    pub target_frequency_hz: f64,
    /// Planar plate length `l`.
    pub plate_length_m: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            c_prime_f_per_m: 56e-12,
            z1_ohm: 135.0,
            v_phase_m_per_s: 1.28e8,
            l0_h: 0.7e-9,
            q_m: 400e-6,
            z0_ohm: 50.0,
            c_s_f: None,
            d0_ea0: 1898.0,
            target_frequency_hz: 11e9,
            plate_length_m: 1e-3,
        }
    }
}

impl CircuitConfig {
    pub fn line(&self) -> Result<CpwLine<f64>> {
        CpwLine::new(self.c_prime_f_per_m, self.z1_ohm, self.v_phase_m_per_s)
    }

    pub fn target_omega(&self) -> f64 {
        TWO_PI * self.target_frequency_hz
    }

    pub fn dipole(&self) -> f64 {
        self.d0_ea0 * EA0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub settings: SolverSettings,
    /// Extra grid refinements tried when the capacitance cross-check fails.
    #[serde(default = "one")]
    pub max_refinements: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRanges {
    pub planar_a_m: Vec<f64>,
    pub planar_b_m: Vec<f64>,
    pub flipchip_d_m: Vec<f64>,
    /// Evaluate η for every row.
    #[serde(default)]
    pub homogeneity: bool,
}

impl Default for SweepRanges {
    fn default() -> Self {
        let (a, b) = crate::optimize::default_planar_grid();
        Self { planar_a_m: a, planar_b_m: b, flipchip_d_m: crate::optimize::default_flipchip_distances(), homogeneity: true }
    }
}

/// Parameters of a synthetic reflection trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub f0_hz: f64,
    pub q_int: f64,
    pub q_ext: f64,
    pub theta_rad: f64,
    /// Background polynomial about `f0`, per linewidth: `a0 + a1 x + a2 x²`
    /// with `x = (ω - ω0)/κ`.
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub phi0_rad: f64,
    /// Phase slope in rad per linewidth.
    pub phi1_rad: f64,
    /// Half span in linewidths.
    pub half_span_linewidths: f64,
    pub points: usize,
    pub sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            f0_hz: 11.708e9,
            q_int: 5.2e3,
            q_ext: 18.3e3,
            theta_rad: 0.1,
            a0: 0.8,
            a1: 0.03,
            a2: -0.002,
            phi0_rad: 0.4,
            phi1_rad: 0.05,
            half_span_linewidths: 5.0,
            points: 1601,
            sigma: 0.01,
        }
    }
}

impl SynthConfig {
    pub fn params(&self) -> Result<ResonanceParams> {
        let mut p = ResonanceParams::from_quality(TWO_PI * self.f0_hz, self.q_int, self.q_ext)?;
        let k = p.kappa();
        p.theta = self.theta_rad;
        p.a0 = self.a0;
        p.a1 = self.a1 / k;
        p.a2 = self.a2 / (k * k);
        p.phi0 = self.phi0_rad;
        p.phi1 = self.phi1_rad / k;
        Ok(p)
    }

    /// Angular-frequency span of the trace.
    pub fn span(&self) -> Result<(f64, f64)> {
        let p = self.params()?;
        let h = self.half_span_linewidths * p.kappa();
        Ok((p.omega0 - h, p.omega0 + h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub beam: BeamConfig,
    #[serde(default)]
    pub species: SpeciesConfig,
    #[serde(default)]
    pub cloud: CloudConfig,
    #[serde(default)]
    pub exposure: ExposureConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepRanges,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ProjectConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Builds every domain object once so invalid values surface at load time.
    pub fn validate(&self) -> Result<()> {
        self.beam()?;
        self.species()?;
        let c = &self.cloud;
        crate::error::ensure_positive("cloud.temperature_k", c.temperature_k)?;
        if !(c.atom_count >= 0.0) {
            return Err(Error::InvalidParameter { name: "cloud.atom_count", reason: "must be >= 0".into() });
        }
        crate::error::ensure_positive("exposure.power_limit_w", self.exposure.power_limit_w)?;
        if !(self.exposure.chip_width_m >= 0.0) {
            return Err(Error::InvalidParameter { name: "exposure.chip_width_m", reason: "must be >= 0".into() });
        }
        self.circuit.line()?;
        for (name, v) in [
            ("circuit.l0_h", self.circuit.l0_h),
            ("circuit.q_m", self.circuit.q_m),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter { name, reason: "must be >= 0".into() });
            }
        }
        for (name, v) in [
            ("circuit.z0_ohm", self.circuit.z0_ohm),
            ("circuit.d0_ea0", self.circuit.d0_ea0),
            ("circuit.target_frequency_hz", self.circuit.target_frequency_hz),
            ("circuit.plate_length_m", self.circuit.plate_length_m),
        ] {
            crate::error::ensure_positive(name, v)?;
        }
        if let Some(cs) = self.circuit.c_s_f {
            crate::error::ensure_positive("circuit.c_s_f", cs)?;
        }
        self.geometry.cross_section()?;
        self.solver.grid.validate()?;
        self.solver.settings.validate()?;
        self.synth.params()?;
        Ok(())
    }

    pub fn beam(&self) -> Result<GaussianBeam<f64>> {
        let b = &self.beam;
        GaussianBeam::new(b.wavelength_m, b.waist_m, b.power_w, b.focus_height_m)
    }

    pub fn species(&self) -> Result<AtomicSpecies<f64>> {
        let s = &self.species;
        let custom = [s.mass_da, s.d1_frequency_hz, s.d2_frequency_hz, s.d1_linewidth_hz, s.d2_linewidth_hz];
        match s.name.as_deref() {
            Some("rb87") | Some("Rb87") if custom.iter().all(Option::is_none) => Ok(AtomicSpecies::rubidium87()),
            Some("rb87") | Some("Rb87") => Err(Error::InvalidParameter {
                name: "species",
                reason: "the built-in species takes no custom constants".into(),
            }),
            Some(other) if !other.is_empty() && custom.iter().all(Option::is_none) => {
                Err(Error::InvalidParameter { name: "species.name", reason: format!("unknown species `{other}`") })
            }
            _ => {
                let get = |v: Option<f64>, key: &'static str| v.ok_or(missing(key));
                AtomicSpecies::new(
                    get(s.mass_da, "species.mass_da")? * DALTON,
                    TWO_PI * get(s.d1_frequency_hz, "species.d1_frequency_hz")?,
                    TWO_PI * get(s.d2_frequency_hz, "species.d2_frequency_hz")?,
                    TWO_PI * get(s.d1_linewidth_hz, "species.d1_linewidth_hz")?,
                    TWO_PI * get(s.d2_linewidth_hz, "species.d2_linewidth_hz")?,
                )
            }
        }
    }

    pub fn native_model(&self) -> crate::optimize::NativeModel {
        crate::optimize::NativeModel {
            grid: self.solver.grid,
            solver: self.solver.settings,
            planar_layout: self.geometry.planar,
            flipchip_layout: self.geometry.flipchip,
            max_refinements: self.solver.max_refinements,
            cache: crate::fieldsolve::SolveCache::new(),
        }
    }

    /// Sweep inputs; the cloud is included when η is requested.
    pub fn sweep_config(&self, jobs: Option<usize>) -> Result<SweepConfig> {
        let beam = self.beam()?;
        let cloud = if self.sweep.homogeneity {
            Some(crate::beam_trap::cloud_profile(&beam, &self.species()?, self.cloud.temperature_k, self.cloud.atom_count)?)
        } else {
            None
        };
        Ok(SweepConfig {
            target_omega: self.circuit.target_omega(),
            plate_length: self.circuit.plate_length_m,
            line: self.circuit.line()?,
            lumped_inductance: self.circuit.l0_h,
            lumped_length: self.circuit.q_m,
            dipole: self.circuit.dipole(),
            atom_height: self.geometry.planar.probe_height_m,
            cloud,
            beam,
            power_limit: self.exposure.power_limit_w,
            jobs,
        })
    }
}
