use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("laser frequency is resonant with an atomic transition")]
    ResonantWavelength,

    #[error("blue-detuned beam does not form a trap")]
    NoTrap,

    #[error("harmonic approximation invalid: cloud temperature {temperature} K exceeds trap depth {depth} K")]
    CloudTooHot { temperature: f64, depth: f64 },

    #[error("no safe chip width: z0/w_dp = {ratio:.3} is below the edge ratio r_e = {edge_ratio:.3}")]
    NoSafeWidth { ratio: f64, edge_ratio: f64 },

    #[error("line length {s_tilde} m is within {margin} m of the quarter-wave pole at {quarter_wave} m")]
    NearQuarterWavePole { s_tilde: f64, quarter_wave: f64, margin: f64 },

    #[error("no resonance found: {0}")]
    NoResonance(String),

    #[error("target {target:.6e} rad/s unreachable; achievable range is ({min:.6e}, {max:.6e}) rad/s")]
    TargetUnreachable { target: f64, min: f64, max: f64 },

    #[error("inconsistent capacitances: C_dc = {c_dc:e} F does not exceed the line contribution {line:e} F")]
    NegativePlateCapacitance { c_dc: f64, line: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("point ({x:e}, {z:e}) lies outside the field map")]
    OutOfDomain { x: f64, z: f64 },

    #[error("under-resolved grid: energy capacitance {energy:e} F/m and charge capacitance {charge:e} F/m differ by {rel_diff:.2e}")]
    UnderResolved { energy: f64, charge: f64, rel_diff: f64 },

    #[error("query ({a:e}, {b:e}) lies outside the sweep table")]
    Extrapolation { a: f64, b: f64 },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("no discernible resonance dip: depth {depth:e} vs noise floor {noise:e}")]
    NoDip { depth: f64, noise: f64 },

    #[error("fit stage `{stage}` failed: {reason}")]
    FitFailed { stage: &'static str, reason: String },

    #[error("{0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite and > 0, got {v}") })
    }
}
