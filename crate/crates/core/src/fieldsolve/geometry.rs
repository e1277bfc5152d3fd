use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [z0, z1]`; zero height or width allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        Self { x0: x0.min(x1), x1: x0.max(x1), z0: z0.min(z1), z1: z0.max(z1) }
    }

    /// Horizontal strip at height `z`.
    pub fn strip(x0: f64, x1: f64, z: f64) -> Self {
        Self::new(x0, x1, z, z)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.z1 - self.z0
    }

    pub fn contains(&self, x: f64, z: f64, tol: f64) -> bool {
        x >= self.x0 - tol && x <= self.x1 + tol && z >= self.z0 - tol && z <= self.z1 + tol
    }

    /// Closed-set intersection test.
    pub fn touches(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.z0 <= o.z1 && o.z0 <= self.z1
    }

    fn is_finite(&self) -> bool {
        [self.x0, self.x1, self.z0, self.z1].iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conductor {
    pub name: String,
    pub shape: Rect,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dielectric {
    pub region: Rect,
    pub eps_r: f64,
}

/// Region that the grid must resolve with a given spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineWindow {
    pub region: Rect,
    pub spacing: f64,
}

/// Design parameters a cross-section was built from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeometryParams {
    pub plate_width: Option<f64>,
    pub gap: Option<f64>,
    pub plate_distance: Option<f64>,
    pub substrate_thickness: Option<f64>,
}

/// 2D conductor and dielectric layout with applied potentials.
///
/// Later dielectric regions override earlier ones; cells outside every region
/// are vacuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipCrossSection {
    pub conductors: Vec<Conductor>,
    pub dielectrics: Vec<Dielectric>,
    pub domain: Rect,
    pub windows: Vec<RefineWindow>,
    /// Reference evaluation point (atom position).
    pub probe: (f64, f64),
    pub params: GeometryParams,
}

/// Half-width of the default simulation box.
pub const DEFAULT_BOX: f64 = 5e-3;
/// Sapphire permittivity.
pub const EPS_SAPPHIRE: f64 = 10.0;

/// Options for the planar plate-gap-ground layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarLayout {
    /// Depth of the ground cutout behind the gap, measured from the gap edge of the plate.
    pub cutout_depth_m: f64,
    /// Minimum ground clearance behind the plate when the plate is wider than the cutout.
    pub min_clearance_m: f64,
    pub eps_substrate: f64,
    pub box_half_width_m: f64,
    /// Atom height above the chip.
    pub probe_height_m: f64,
    /// Grid spacing around the atom position.
    pub probe_spacing_m: f64,
}

impl Default for PlanarLayout {
    fn default() -> Self {
        Self {
            cutout_depth_m: 200e-6,
            min_clearance_m: 50e-6,
            eps_substrate: EPS_SAPPHIRE,
            box_half_width_m: DEFAULT_BOX,
            probe_height_m: 80e-6,
            probe_spacing_m: 1e-6,
        }
    }
}

/// Options for the flip-chip plate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipChipLayout {
    pub substrate_thickness_m: f64,
    pub eps_substrate: f64,
    pub box_half_width_m: f64,
    pub probe_spacing_m: f64,
}

impl Default for FlipChipLayout {
    fn default() -> Self {
        Self {
            substrate_thickness_m: 330e-6,
            eps_substrate: EPS_SAPPHIRE,
            box_half_width_m: DEFAULT_BOX,
            probe_spacing_m: 1e-6,
        }
    }
}

impl ChipCrossSection {
    /// Checks the layout invariants.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !d.is_finite() || d.width() <= 0.0 || d.height() <= 0.0 {
            return Err(Error::Geometry("domain must have positive, finite extent".into()));
        }
        if self.conductors.is_empty() {
            return Err(Error::Geometry("at least one conductor is required".into()));
        }
        for c in &self.conductors {
            if !c.shape.is_finite() || !c.potential.is_finite() {
                return Err(Error::Geometry(format!("conductor '{}' has non-finite data", c.name)));
            }
            if c.shape.x0 < d.x0 || c.shape.x1 > d.x1 || c.shape.z0 < d.z0 || c.shape.z1 > d.z1 {
                return Err(Error::Geometry(format!("conductor '{}' leaves the domain", c.name)));
            }
        }
        for (i, a) in self.conductors.iter().enumerate() {
            for b in &self.conductors[i + 1..] {
                if a.shape.touches(&b.shape) {
                    return Err(Error::Geometry(format!(
                        "conductors '{}' and '{}' overlap or touch (zero gap)",
                        a.name, b.name
                    )));
                }
            }
        }
        for e in &self.dielectrics {
            if !e.region.is_finite() || !(e.eps_r >= 1.0) {
                return Err(Error::Geometry(format!("dielectric needs eps_r >= 1, got {}", e.eps_r)));
            }
        }
        for w in &self.windows {
            if !(w.spacing > 0.0) || !w.region.is_finite() {
                return Err(Error::Geometry("refinement window needs positive spacing".into()));
            }
        }
        // Interior conductors need a clear margin of five feature sizes; conductors
        // reaching the box edge stand for semi-infinite ground planes.
        let interior: Vec<&Conductor> = self
            .conductors
            .iter()
            .filter(|c| c.shape.x0 > d.x0 && c.shape.x1 < d.x1 && c.shape.z0 > d.z0 && c.shape.z1 < d.z1)
            .collect();
        if !interior.is_empty() {
            let bx0 = interior.iter().map(|c| c.shape.x0).fold(f64::INFINITY, f64::min);
            let bx1 = interior.iter().map(|c| c.shape.x1).fold(f64::NEG_INFINITY, f64::max);
            let bz0 = interior.iter().map(|c| c.shape.z0).fold(f64::INFINITY, f64::min);
            let bz1 = interior.iter().map(|c| c.shape.z1).fold(f64::NEG_INFINITY, f64::max);
            let feature = interior.iter().map(|c| c.shape.width().max(c.shape.height())).fold(0.0, f64::max);
            let margin = (bx0 - d.x0).min(d.x1 - bx1).min(bz0 - d.z0).min(d.z1 - bz1);
            if margin < 5.0 * feature {
                return Err(Error::Geometry(format!(
                    "box margin {margin:.3e} m is below five times the largest feature {feature:.3e} m"
                )));
            }
        }
        if !d.contains(self.probe.0, self.probe.1, 0.0) {
            return Err(Error::Geometry("probe point lies outside the domain".into()));
        }
        Ok(())
    }

    /// Potential span `max - min` over the conductors.
    pub fn voltage_span(&self) -> f64 {
        let hi = self.conductors.iter().map(|c| c.potential).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.conductors.iter().map(|c| c.potential).fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Index of the conductor with the given name.
    pub fn conductor_index(&self, name: &str) -> Option<usize> {
        self.conductors.iter().position(|c| c.name == name)
    }

    /// Relative permittivity at a point.
    pub fn eps_at(&self, x: f64, z: f64) -> f64 {
        self.dielectrics.iter().rev().find(|e| e.region.contains(x, z, 0.0)).map_or(1.0, |e| e.eps_r)
    }

    /// Points where the conductor boundaries terminate (field singularities).
    pub fn edge_coordinates(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for c in &self.conductors {
            xs.extend([c.shape.x0, c.shape.x1]);
            zs.extend([c.shape.z0, c.shape.z1]);
        }
        (xs, zs)
    }

    /// All coordinates that must be grid nodes.
    pub fn breakpoints(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut xs, mut zs) = self.edge_coordinates();
        for e in &self.dielectrics {
            xs.extend([e.region.x0, e.region.x1]);
            zs.extend([e.region.z0, e.region.z1]);
        }
        xs.extend([self.domain.x0, self.domain.x1, self.probe.0]);
        zs.extend([self.domain.z0, self.domain.z1, self.probe.1]);
        (xs, zs)
    }

    /// `self` with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let r = |r: &Rect| Rect::new(r.x0 * k, r.x1 * k, r.z0 * k, r.z1 * k);
        Self {
            conductors: self
                .conductors
                .iter()
                .map(|c| Conductor { name: c.name.clone(), shape: r(&c.shape), potential: c.potential })
                .collect(),
            dielectrics: self.dielectrics.iter().map(|e| Dielectric { region: r(&e.region), eps_r: e.eps_r }).collect(),
            domain: r(&self.domain),
            windows: self.windows.iter().map(|w| RefineWindow { region: r(&w.region), spacing: w.spacing * k }).collect(),
            probe: (self.probe.0 * k, self.probe.1 * k),
            params: GeometryParams {
                plate_width: self.params.plate_width.map(|v| v * k),
                gap: self.params.gap.map(|v| v * k),
                plate_distance: self.params.plate_distance.map(|v| v * k),
                substrate_thickness: self.params.substrate_thickness.map(|v| v * k),
            },
        }
    }

    /// Copy with every conductor potential multiplied by `k`.
    pub fn with_voltage_scale(&self, k: f64) -> Self {
        let mut g = self.clone();
        for c in &mut g.conductors {
            c.potential *= k;
        }
        g
    }

    /// Stable digest of the layout, used as a cache key.
    pub fn hash_into(&self, h: &mut Sha256) {
        let rect = |h: &mut Sha256, r: &Rect| {
            for v in [r.x0, r.x1, r.z0, r.z1] {
                h.update(v.to_bits().to_le_bytes());
            }
        };
        h.update(b"conductors");
        for c in &self.conductors {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            rect(h, &c.shape);
            h.update(c.potential.to_bits().to_le_bytes());
        }
        h.update(b"dielectrics");
        for e in &self.dielectrics {
            rect(h, &e.region);
            h.update(e.eps_r.to_bits().to_le_bytes());
        }
        h.update(b"windows");
        for w in &self.windows {
            rect(h, &w.region);
            h.update(w.spacing.to_bits().to_le_bytes());
        }
        h.update(b"domain");
        rect(h, &self.domain);
        h.update(self.probe.0.to_bits().to_le_bytes());
        h.update(self.probe.1.to_bits().to_le_bytes());
    }

    /// Planar resonator end: plate of width `a` at 1 V, gap `b` to the ground
    /// plane, ground cutout behind the plate, sapphire half-space below `z = 0`.
    ///
    /// The gap is centred at `x = 0`; the atom sits at `(0, probe_height)`.
    pub fn planar(a: f64, b: f64, layout: &PlanarLayout) -> Result<Self> {
        for (name, v) in [("plate_width", a), ("gap", b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {v}") });
            }
        }
        let bx = layout.box_half_width_m;
        let back = -b / 2.0 - layout.cutout_depth_m.max(a + layout.min_clearance_m);
        if back <= -bx {
            return Err(Error::Geometry("ground cutout exceeds the simulation box".into()));
        }
        let z0 = layout.probe_height_m;
        let hs = layout.probe_spacing_m;
        let geom = Self {
            conductors: vec![
                Conductor { name: "plate".into(), shape: Rect::strip(-b / 2.0 - a, -b / 2.0, 0.0), potential: 1.0 },
                Conductor { name: "ground".into(), shape: Rect::strip(b / 2.0, bx, 0.0), potential: 0.0 },
                Conductor { name: "back_ground".into(), shape: Rect::strip(-bx, back, 0.0), potential: 0.0 },
            ],
            dielectrics: vec![Dielectric { region: Rect::new(-bx, bx, -bx, 0.0), eps_r: layout.eps_substrate }],
            domain: Rect::new(-bx, bx, -bx, bx),
            windows: vec![RefineWindow { region: Rect::new(-3e-6, 3e-6, z0 - 3e-6, z0 + 3e-6), spacing: hs }],
            probe: (0.0, z0),
            params: GeometryParams { plate_width: Some(a), gap: Some(b), ..Default::default() },
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Flip-chip plate pair, cut across the beam (`x-z` plane).
    ///
    /// Plates of width `a` at `z = ∓d/2` (live plate below), each backed by its
    /// substrate; the atoms sit midway at the origin.
    pub fn flipchip(d: f64, a: f64, layout: &FlipChipLayout) -> Result<Self> {
        for (name, v) in [("plate_distance", d), ("plate_width", a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {v}") });
            }
        }
        let bx = layout.box_half_width_m;
        let t = layout.substrate_thickness_m;
        if d / 2.0 + t >= bx {
            return Err(Error::Geometry("substrates exceed the simulation box".into()));
        }
        let hs = layout.probe_spacing_m;
        let geom = Self {
            conductors: vec![
                Conductor { name: "plate".into(), shape: Rect::strip(-a / 2.0, a / 2.0, -d / 2.0), potential: 1.0 },
                Conductor { name: "counter".into(), shape: Rect::strip(-a / 2.0, a / 2.0, d / 2.0), potential: 0.0 },
            ],
            dielectrics: vec![
                Dielectric { region: Rect::new(-bx, bx, -d / 2.0 - t, -d / 2.0), eps_r: layout.eps_substrate },
                Dielectric { region: Rect::new(-bx, bx, d / 2.0, d / 2.0 + t), eps_r: layout.eps_substrate },
            ],
            domain: Rect::new(-bx, bx, -bx, bx),
            windows: vec![RefineWindow { region: Rect::new(-3e-6, 3e-6, -3e-6, 3e-6), spacing: hs }],
            probe: (0.0, 0.0),
            params: GeometryParams {
                plate_width: Some(a),
                plate_distance: Some(d),
                substrate_thickness: Some(t),
                ..Default::default()
            },
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Flip-chip plate pair cut along the beam (`y-z` plane): plates of
    /// length `l`, with a refinement window covering `±half_window` along the
    /// beam for the cloud.
    pub fn flipchip_longitudinal(d: f64, l: f64, half_window: f64, layout: &FlipChipLayout) -> Result<Self> {
        let mut wide = *layout;
        wide.box_half_width_m = layout.box_half_width_m.max(6.0 * l);
        let mut g = Self::flipchip(d, l, &wide)?;
        let w = half_window.max(3e-6);
        let spacing = (w / 30.0).max(layout.probe_spacing_m);
        g.windows = vec![RefineWindow { region: Rect::new(-w, w, -3e-6, 3e-6), spacing }];
        g.validate()?;
        Ok(g)
    }

    /// Two plates of width `w` and spacing `d` in vacuum, `±V/2`.
    pub fn parallel_plates(w: f64, d: f64, box_half_width: f64) -> Result<Self> {
        let geom = Self {
            conductors: vec![
                Conductor { name: "top".into(), shape: Rect::strip(-w / 2.0, w / 2.0, d / 2.0), potential: 1.0 },
                Conductor { name: "bottom".into(), shape: Rect::strip(-w / 2.0, w / 2.0, -d / 2.0), potential: 0.0 },
            ],
            dielectrics: Vec::new(),
            domain: Rect::new(-box_half_width, box_half_width, -box_half_width, box_half_width),
            windows: Vec::new(),
            probe: (0.0, 0.0),
            params: GeometryParams { plate_width: Some(w), plate_distance: Some(d), ..Default::default() },
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Coplanar line: centre strip of width `w` at 1 V, gaps `s`, grounds to the
    /// box edge, substrate of permittivity `eps_r` filling `z < 0`.
    pub fn coplanar(w: f64, s: f64, eps_r: f64, box_half_width: f64) -> Result<Self> {
        let bx = box_half_width;
        let geom = Self {
            conductors: vec![
                Conductor { name: "centre".into(), shape: Rect::strip(-w / 2.0, w / 2.0, 0.0), potential: 1.0 },
                Conductor { name: "left".into(), shape: Rect::strip(-bx, -w / 2.0 - s, 0.0), potential: 0.0 },
                Conductor { name: "right".into(), shape: Rect::strip(w / 2.0 + s, bx, 0.0), potential: 0.0 },
            ],
            dielectrics: vec![Dielectric { region: Rect::new(-bx, bx, -bx, 0.0), eps_r }],
            domain: Rect::new(-bx, bx, -bx, bx),
            windows: Vec::new(),
            probe: (0.0, w),
            params: GeometryParams { plate_width: Some(w), gap: Some(s), ..Default::default() },
        };
        geom.validate()?;
        Ok(geom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_layout_positions() {
        let g = ChipCrossSection::planar(120e-6, 40e-6, &PlanarLayout::default()).unwrap();
        let plate = &g.conductors[0].shape;
        assert!((plate.x0 + 140e-6).abs() < 1e-15 && (plate.x1 + 20e-6).abs() < 1e-15);
        assert!((g.conductors[2].shape.x1 + 220e-6).abs() < 1e-15);
        // wide plate keeps the minimum clearance
        let w = ChipCrossSection::planar(500e-6, 40e-6, &PlanarLayout::default()).unwrap();
        assert!((w.conductors[2].shape.x1 + 570e-6).abs() < 1e-15);
        assert_eq!(g.eps_at(0.0, -1e-6), EPS_SAPPHIRE);
        assert_eq!(g.eps_at(0.0, 1e-6), 1.0);
    }

    #[test]
    fn rejects_zero_gap_and_bad_eps() {
        let mut g = ChipCrossSection::parallel_plates(1e-4, 1e-5, 1e-2).unwrap();
        g.conductors[1].shape = Rect::strip(-5e-5, 5e-5, 5e-6);
        assert!(g.validate().is_err());
        let mut g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 5e-3).unwrap();
        g.dielectrics[0].eps_r = 0.5;
        assert!(g.validate().is_err());
        assert!(ChipCrossSection::planar(100e-6, 0.0, &PlanarLayout::default()).is_err());
    }

    #[test]
    fn margin_rule() {
        assert!(ChipCrossSection::parallel_plates(1e-3, 1e-4, 2e-3).is_err());
        assert!(ChipCrossSection::parallel_plates(1e-4, 1e-5, 1e-3).is_ok());
    }

    #[test]
    fn scaling_keeps_shape() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 5e-3).unwrap();
        let s = g.scaled(2.0);
        assert_eq!(s.conductors[0].shape.width(), 40e-6);
        assert_eq!(s.domain.x1, 10e-3);
    }
}
