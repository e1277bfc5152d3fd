//! Geometry sweeps at fixed resonance frequency.
//!
//! Planar sweeps scan plate width `a` and gap `b`; for every point the
//! cross-section gives the plate capacitance and the per-volt field at the
//! atoms, the circuit model fixes the wire length `s` for the target `ω0`, and
//! the coupling `g` follows from the zero-point field. Flip-chip sweeps scan the
//! plate distance `d` with the plate dimensions scaled from it.
//!
//! Field solutions come from a [`CrossSectionModel`], so the sweep logic can
//! be exercised against analytic stand-ins.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam_trap::{AtomCloud, GaussianBeam};
use crate::circuit::{self, CouplingResult, CpwLine, ResonatorModel};
use crate::constants::{EPSILON_0, RYDBERG_DIPOLE_DEFAULT, TWO_PI};
use crate::error::{Error, Result};
use crate::exposure;
use crate::fieldsolve::{
    homogeneity_eta, homogeneity_eta_separable, ChipCrossSection, FieldMap, FlipChipLayout, GridSpec, PlanarLayout,
    SolveCache, SolverSettings,
};

/// What a cross-section model reports for one geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSummary {
    /// Plate capacitance `C0`, F.
    pub capacitance: f64,
    /// `|E|/V` at the cloud centre, 1/m.
    pub field_per_volt: f64,
    pub eta: Option<f64>,
    /// Worst energy/charge disagreement among the solves involved.
    pub capacitance_rel_diff: f64,
    pub iterations: usize,
}

/// Source of capacitances and fields for the sweeps.
pub trait CrossSectionModel: Sync {
    /// Planar plate of width `a` and length `l`, gap `b`.
    fn planar(&self, a: f64, b: f64, l: f64, cloud: Option<&AtomCloud<f64>>) -> Result<FieldSummary>;

    /// Flip-chip plates `a × l` at distance `d`.
    fn flipchip(&self, d: f64, a: f64, l: f64, cloud: Option<&AtomCloud<f64>>) -> Result<FieldSummary>;
}

/// Cross-sections solved with the native field solver.
///
/// A grid failing the energy/charge cross-check is refined up to
/// `max_refinements` times before the point is given up.
#[derive(Debug, Clone)]
pub struct NativeModel {
    pub grid: GridSpec,
    pub solver: SolverSettings,
    pub planar_layout: PlanarLayout,
    pub flipchip_layout: FlipChipLayout,
    pub max_refinements: u32,
    pub cache: SolveCache,
}

impl Default for NativeModel {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            solver: SolverSettings::default(),
            planar_layout: PlanarLayout::default(),
            flipchip_layout: FlipChipLayout::default(),
            max_refinements: 1,
            cache: SolveCache::new(),
        }
    }
}

impl NativeModel {
    /// Solves `geometry`, refining on a failed energy/charge check, and
    /// returns the map with its capacitance per length and the disagreement.
    pub fn resolved(&self, geometry: &ChipCrossSection) -> Result<(std::sync::Arc<FieldMap>, f64, f64)> {
        let mut spec = self.grid;
        let mut last = None;
        for _ in 0..=self.max_refinements {
            let map = self.cache.solve(geometry, &spec, &self.solver)?;
            match map.capacitance_per_length(0) {
                Ok(c) => {
                    let rd = map.capacitance_report(0)?.rel_diff;
                    return Ok((map, c, rd));
                }
                Err(e @ Error::UnderResolved { .. }) => {
                    log::info!("refining grid: {e}");
                    last = Some(e);
                    spec = spec.refined(1);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

impl CrossSectionModel for NativeModel {
    fn planar(&self, a: f64, b: f64, l: f64, cloud: Option<&AtomCloud<f64>>) -> Result<FieldSummary> {
        let g = ChipCrossSection::planar(a, b, &self.planar_layout)?;
        let (map, c, rd) = self.resolved(&g)?;
        let eta = cloud.map(|c| homogeneity_eta(&map, c, g.probe)).transpose()?;
        Ok(FieldSummary {
            capacitance: c * l,
            field_per_volt: map.field_per_volt(g.probe.0, g.probe.1)?,
            eta,
            capacitance_rel_diff: rd,
            iterations: map.iterations,
        })
    }

    fn flipchip(&self, d: f64, a: f64, l: f64, cloud: Option<&AtomCloud<f64>>) -> Result<FieldSummary> {
        let across = ChipCrossSection::flipchip(d, a, &self.flipchip_layout)?;
        let half_window = cloud.map_or(0.0, |c| 3.0 * c.sigma_y);
        let along = ChipCrossSection::flipchip_longitudinal(d, l, half_window, &self.flipchip_layout)?;
        let (m_across, c_across, rd1) = self.resolved(&across)?;
        let (m_along, c_along, rd2) = self.resolved(&along)?;
        // Each section already contains the ideal plate term ε0 a l / d once.
        let capacitance = c_across * l + (c_along - EPSILON_0 * l / d) * a;
        let eta = cloud
            .map(|c| homogeneity_eta_separable(&m_across, across.probe, &m_along, along.probe, c))
            .transpose()?;
        Ok(FieldSummary {
            capacitance,
            field_per_volt: m_across.field_per_volt(across.probe.0, across.probe.1)?,
            eta,
            capacitance_rel_diff: rd1.max(rd2),
            iterations: m_across.iterations + m_along.iterations,
        })
    }
}

/// Sweep inputs shared by every point.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub target_omega: f64,
    /// Planar plate length `l`.
    pub plate_length: f64,
    pub line: CpwLine<f64>,
    pub lumped_inductance: f64,
    /// Non-CPW wire length `q`.
    pub lumped_length: f64,
    pub dipole: f64,
    /// Atom height above the planar chip, reported with the table.
    pub atom_height: f64,
    /// Cloud for η; `None` skips it.
    pub cloud: Option<AtomCloud<f64>>,
    /// Beam and limit for the flip-chip critical chip width.
    pub beam: GaussianBeam<f64>,
    pub power_limit: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            target_omega: TWO_PI * 11e9,
            plate_length: 1e-3,
            line: CpwLine::design_default(),
            lumped_inductance: 0.7e-9,
            lumped_length: 400e-6,
            dipole: RYDBERG_DIPOLE_DEFAULT,
            atom_height: 80e-6,
            cloud: None,
            beam: GaussianBeam::standard(),
            power_limit: exposure::DEFAULT_POWER_LIMIT,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Planar,
    FlipChip,
}

/// Parameters held fixed across a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepFixed {
    pub kind: SweepKind,
    /// Plate length for planar tables; flip-chip rows carry their own.
    pub plate_length: Option<f64>,
    pub lumped_length: f64,
    pub target_omega: f64,
    /// Atom height above the chip; flip-chip atoms sit midway between plates.
    pub atom_height: Option<f64>,
    pub dipole: f64,
}

/// One evaluated geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub a: f64,
    /// Gap for planar rows, plate distance for flip-chip rows.
    pub b: f64,
    /// Wire length; flip-chip rows take the plates as the whole capacitance and have none.
    pub s: Option<f64>,
    /// Effective capacitance `C`.
    pub capacitance: f64,
    /// `L = 1/(ω0² C)`.
    pub inductance: f64,
    pub g: f64,
    pub eta: Option<f64>,
    pub plate_capacitance: f64,
    pub field_per_volt: f64,
    /// Flip-chip plate length `l`.
    pub plate_length: f64,
    pub chip_width: Option<f64>,
    pub critical_chip_width: Option<f64>,
    /// `|ω0(s) - target| / target` after re-solving the resonance.
    pub resonance_error: f64,
    pub capacitance_rel_diff: f64,
    pub iterations: usize,
}

/// A geometry that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub a: f64,
    pub b: f64,
    pub error: String,
}

/// Evaluated points sorted by `(a, b)`, plus the failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub fixed: SweepFixed,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
}

fn sorted_unique(name: &'static str, values: &[f64]) -> Result<Vec<f64>> {
    let mut v = values.to_vec();
    for &x in &v {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InvalidParameter { name, reason: format!("lengths must be > 0, got {x}") });
        }
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    v.dedup();
    if v.len() != n {
        return Err(Error::InvalidParameter { name, reason: "duplicate values".into() });
    }
    if v.is_empty() {
        return Err(Error::InvalidParameter { name, reason: "empty".into() });
    }
    Ok(v)
}

fn run_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter { name: "jobs", reason: e.to_string() })?;
            Ok(pool.install(f))
        }
    }
}

fn planar_point(model: &dyn CrossSectionModel, cfg: &SweepConfig, a: f64, b: f64) -> Result<SweepPoint> {
    let fields = model.planar(a, b, cfg.plate_length, cfg.cloud.as_ref())?;
    let resonator = ResonatorModel {
        plate_capacitance: fields.capacitance,
        line: cfg.line,
        lumped_inductance: cfg.lumped_inductance,
        wire_length: cfg.lumped_length,
        lumped_length: cfg.lumped_length,
        shunt_capacitance: None,
        feed_impedance: 50.0,
    };
    let sol = circuit::design_for_frequency(&resonator, cfg.target_omega)?;
    let omega = resonator.with_wire_length(sol.wire_length)?.resonance_frequency()?;
    let coupling = CouplingResult::evaluate(cfg.target_omega, sol.capacitance, fields.field_per_volt, cfg.dipole)?;
    Ok(SweepPoint {
        a,
        b,
        s: Some(sol.wire_length),
        capacitance: sol.capacitance,
        inductance: sol.inductance,
        g: coupling.g,
        eta: fields.eta,
        plate_capacitance: fields.capacitance,
        field_per_volt: fields.field_per_volt,
        plate_length: cfg.plate_length,
        chip_width: None,
        critical_chip_width: None,
        resonance_error: (omega - cfg.target_omega).abs() / cfg.target_omega,
        capacitance_rel_diff: fields.capacitance_rel_diff,
        iterations: fields.iterations,
    })
}

fn flipchip_point(model: &dyn CrossSectionModel, cfg: &SweepConfig, d: f64) -> Result<SweepPoint> {
    let a = d;
    let l = exposure::flipchip_plate_length(d);
    let fields = model.flipchip(d, a, l, cfg.cloud.as_ref())?;
    let c = fields.capacitance;
    let coupling = CouplingResult::evaluate(cfg.target_omega, c, fields.field_per_volt, cfg.dipole)?;
    let crit = match exposure::critical_chip_width(&cfg.beam, d / 2.0, cfg.power_limit, exposure::ChipSurfaces::Double) {
        Ok(v) => Some(v),
        Err(Error::NoSafeWidth { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SweepPoint {
        a,
        b: d,
        s: None,
        capacitance: c,
        inductance: 1.0 / (cfg.target_omega * cfg.target_omega * c),
        g: coupling.g,
        eta: fields.eta,
        plate_capacitance: c,
        field_per_volt: fields.field_per_volt,
        plate_length: l,
        chip_width: Some(exposure::flipchip_chip_width(d)),
        critical_chip_width: crit,
        resonance_error: 0.0,
        capacitance_rel_diff: fields.capacitance_rel_diff,
        iterations: fields.iterations,
    })
}

fn assemble(fixed: SweepFixed, results: Vec<((f64, f64), Result<SweepPoint>)>) -> SweepTable {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for ((a, b), r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                log::warn!("sweep point ({a:e}, {b:e}) failed: {e}");
                failures.push(SweepFailure { a, b, error: e.to_string() });
            }
        }
    }
    SweepTable { fixed, points, failures }
}

/// Planar `a × b` sweep. Failed points are recorded and skipped.
pub fn sweep_planar(
    model: &dyn CrossSectionModel,
    a_values: &[f64],
    b_values: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    let a_values = sorted_unique("a_values", a_values)?;
    let b_values = sorted_unique("b_values", b_values)?;
    crate::error::ensure_positive("target_omega", cfg.target_omega)?;
    let keys: Vec<(f64, f64)> = a_values.iter().flat_map(|&a| b_values.iter().map(move |&b| (a, b))).collect();
    let results = run_pool(cfg.jobs, || {
        keys.par_iter().map(|&(a, b)| ((a, b), planar_point(model, cfg, a, b))).collect::<Vec<_>>()
    })?;
    let fixed = SweepFixed {
        kind: SweepKind::Planar,
        plate_length: Some(cfg.plate_length),
        lumped_length: cfg.lumped_length,
        target_omega: cfg.target_omega,
        atom_height: Some(cfg.atom_height),
        dipole: cfg.dipole,
    };
    Ok(assemble(fixed, results))
}

/// Flip-chip distance sweep with `a = d`, `l = max(2d, 250 µm)`.
pub fn sweep_flipchip(model: &dyn CrossSectionModel, d_values: &[f64], cfg: &SweepConfig) -> Result<SweepTable> {
    let d_values = sorted_unique("d_values", d_values)?;
    crate::error::ensure_positive("target_omega", cfg.target_omega)?;
    let results = run_pool(cfg.jobs, || {
        d_values.par_iter().map(|&d| ((d, d), flipchip_point(model, cfg, d))).collect::<Vec<_>>()
    })?;
    let fixed = SweepFixed {
        kind: SweepKind::FlipChip,
        plate_length: None,
        lumped_length: cfg.lumped_length,
        target_omega: cfg.target_omega,
        atom_height: None,
        dipole: cfg.dipole,
    };
    Ok(assemble(fixed, results))
}

/// Fine planar grid: `a` 40–140 µm in 20 µm steps, `b` 20–100 µm in 10 µm steps.
pub fn default_planar_grid() -> (Vec<f64>, Vec<f64>) {
    let a = (0..6).map(|i| (40.0 + 20.0 * i as f64) / 1e6).collect();
    let b = (0..9).map(|i| (20.0 + 10.0 * i as f64) / 1e6).collect();
    (a, b)
}

/// Coarse planar plate widths, 50, 200 and 500 µm.
pub fn coarse_planar_widths() -> Vec<f64> {
    vec![50e-6, 200e-6, 500e-6]
}

/// Reference flip-chip distances, 100–600 µm in 50 µm steps.
pub fn default_flipchip_distances() -> Vec<f64> {
    (0..11).map(|i| (100.0 + 50.0 * i as f64) / 1e6).collect()
}

impl SweepTable {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Row at `(a, b)`, matching keys to 1e-9 relative so that keys written
    /// as `60e-6` and computed as `3.0 * 20e-6` agree.
    pub fn get(&self, a: f64, b: f64) -> Option<&SweepPoint> {
        let same = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
        self.points.iter().find(|p| same(p.a, a) && same(p.b, b))
    }

    /// Point of largest `g`; ties go to smaller `a`, then smaller `b`.
    pub fn optimum(&self) -> Result<&SweepPoint> {
        let mut best: Option<&SweepPoint> = None;
        for p in &self.points {
            best = match best {
                None => Some(p),
                Some(q) => {
                    let better = p.g > q.g || (p.g == q.g && (p.a, p.b) < (q.a, q.b));
                    Some(if better { p } else { q })
                }
            };
        }
        best.ok_or_else(|| Error::InvalidParameter { name: "table", reason: "no evaluated points".into() })
    }

    /// Largest relative loss of `g` against the optimum over points whose `a`
    /// and `b` each lie within `fraction` of the optimum's.
    pub fn flatness(&self, fraction: f64) -> Result<f64> {
        let best = self.optimum()?;
        let near = |v: f64, c: f64| (v - c).abs() <= fraction * c * (1.0 + 1e-9);
        Ok(self
            .points
            .iter()
            .filter(|p| near(p.a, best.a) && near(p.b, best.b))
            .map(|p| 1.0 - p.g / best.g)
            .fold(0.0, f64::max))
    }

    /// Straight-line fit of `L(s)` over the rows, evaluated at `s = q`.
    pub fn lumped_inductance_estimate(&self) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self.points.iter().filter_map(|p| p.s.map(|s| (s, p.inductance))).collect();
        circuit::extrapolate_inductance(&pts, self.fixed.lumped_length)
    }

    /// CSV export. Planar tables use `a_m,b_m,...`; flip-chip tables name the
    /// second key `d_m` and append the chip-width columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let flip = self.fixed.kind == SweepKind::FlipChip;
        let mut header = vec!["a_m", if flip { "d_m" } else { "b_m" }, "s_m", "C_F", "L_H", "g_rad_per_s", "eta"];
        if flip {
            header.extend(["l_m", "l_ch_m", "l_ch_crit_m"]);
        }
        w.write_record(&header).map_err(csv_err)?;
        for p in &self.points {
            let mut row = vec![
                format!("{:e}", p.a),
                format!("{:e}", p.b),
                opt(p.s),
                format!("{:e}", p.capacitance),
                format!("{:e}", p.inductance),
                format!("{:e}", p.g),
                opt(p.eta),
            ];
            if flip {
                row.extend([format!("{:e}", p.plate_length), opt(p.chip_width), opt(p.critical_chip_width)]);
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// [`SweepTable::optimum`] as a free function, cloned out of the table.
pub fn find_optimum(table: &SweepTable) -> Result<SweepPoint> {
    table.optimum().copied()
}

/// Bilinear interpolation of the `(a, b) → s` map.
///
/// The query must lie inside the rectangle spanned by the table keys, and the
/// four surrounding rows must all have been evaluated.
pub fn interpolate_s(table: &SweepTable, a: f64, b: f64) -> Result<f64> {
    let keys = |f: fn(&SweepPoint) -> f64| -> Vec<f64> {
        let set: BTreeSet<u64> = table.points.iter().map(|p| f(p).to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let av = keys(|p| p.a);
    let bv = keys(|p| p.b);
    let outside = || Error::Extrapolation { a, b };
    if av.is_empty() || bv.is_empty() {
        return Err(outside());
    }
    let bracket = |v: &[f64], x: f64| -> Option<(usize, usize)> {
        if !(x >= v[0] && x <= v[v.len() - 1]) {
            return None;
        }
        if v.len() == 1 {
            return Some((0, 0));
        }
        let i = v.partition_point(|&k| k <= x).clamp(1, v.len() - 1);
        Some((i - 1, i))
    };
    let (i0, i1) = bracket(&av, a).ok_or_else(outside)?;
    let (j0, j1) = bracket(&bv, b).ok_or_else(outside)?;
    let s_at = |i: usize, j: usize| -> Result<f64> {
        table.get(av[i], bv[j]).and_then(|p| p.s).ok_or_else(|| Error::InvalidParameter {
            name: "table",
            reason: format!("no wire length at ({:e}, {:e})", av[i], bv[j]),
        })
    };
    let frac = |v: &[f64], k0: usize, k1: usize, x: f64| if k1 == k0 { 0.0 } else { (x - v[k0]) / (v[k1] - v[k0]) };
    let (u, t) = (frac(&av, i0, i1, a), frac(&bv, j0, j1, b));
    let (s00, s10, s01, s11) = (s_at(i0, j0)?, s_at(i1, j0)?, s_at(i0, j1)?, s_at(i1, j1)?);
    Ok((1.0 - u) * (1.0 - t) * s00 + u * (1.0 - t) * s10 + (1.0 - u) * t * s01 + u * t * s11)
}
