//! Graded rectilinear grids.
//!
//! Node spacing follows a target function `h(x)`: it shrinks like `sqrt(dist)`
//! towards conductor edges (where the potential behaves as `r^½`), grows
//! geometrically away from them and is capped at `h_max`. Nodes are placed at
//! integer levels of `∫ dx / h`, with every geometric breakpoint kept as a node.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::geometry::ChipCrossSection;
use crate::error::{Error, Result};

/// Grid resolution settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Spacing scale at a conductor edge, metres.
    pub h_edge_m: f64,
    /// Largest spacing anywhere, metres.
    pub h_max_m: f64,
    /// Geometric growth factor of neighbouring spacings away from features.
    pub growth: f64,
    /// Each level halves every spacing.
    pub refine_level: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { h_edge_m: 2e-6, h_max_m: 100e-6, growth: 1.15, refine_level: 0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_edge_m > 0.0 && self.h_max_m >= self.h_edge_m && self.growth > 1.0 && self.growth < 3.0) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need 0 < h_edge <= h_max and 1 < growth < 3".into(),
            });
        }
        if self.refine_level > 6 {
            return Err(Error::InvalidParameter { name: "refine_level", reason: "at most 6".into() });
        }
        Ok(())
    }

    pub fn refined(mut self, levels: u32) -> Self {
        self.refine_level += levels;
        self
    }

    fn scale(&self) -> f64 {
        0.5f64.powi(self.refine_level as i32)
    }

    pub fn hash_into(&self, h: &mut Sha256) {
        h.update(b"grid");
        for v in [self.h_edge_m, self.h_max_m, self.growth] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.refine_level.to_le_bytes());
    }
}

/// One window of prescribed spacing along an axis.
#[derive(Debug, Clone, Copy)]
struct Window {
    lo: f64,
    hi: f64,
    h: f64,
}

struct Spacing {
    scale: f64,
    edges: Vec<f64>,
    windows: Vec<Window>,
    h_edge: f64,
    h_max: f64,
    slope: f64,
}

impl Spacing {
    fn at(&self, x: f64) -> f64 {
        let mut h = self.h_max;
        for &e in &self.edges {
            let d = (x - e).abs();
            h = h.min(self.h_edge * (d / self.h_edge).sqrt() + self.slope * d);
        }
        for w in &self.windows {
            let d = (w.lo - x).max(x - w.hi).max(0.0);
            h = h.min(w.h + self.slope * d);
        }
        self.scale * h
    }
}

/// Builds one graded axis over `[lo, hi]`.
fn build_axis(lo: f64, hi: f64, breakpoints: &[f64], edges: &[f64], windows: Vec<Window>, spec: &GridSpec) -> Vec<f64> {
    let k = spec.scale();
    let tol = 1e-12 * (hi - lo);
    let mut bps: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > lo + tol && p < hi - tol).collect();
    bps.push(lo);
    bps.push(hi);
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let spacing = Spacing {
        scale: k,
        edges: edges.to_vec(),
        windows,
        h_edge: spec.h_edge_m,
        h_max: spec.h_max_m,
        slope: spec.growth - 1.0,
    };

    // Cumulative ∫dx/h on each segment with x = a + (b-a)(1 - cos πt)/2; the
    // substitution cancels the 1/sqrt singularity of 1/h at the segment ends.
    const M: usize = 512;
    let mut nodes = vec![bps[0]];
    let mut xs = vec![0.0; M + 1];
    let mut cum = vec![0.0; M + 1];
    for seg in bps.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let integrand = |t: f64| {
            let x = a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            let dxdt = (b - a) * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * t).sin();
            (x, dxdt / spacing.at(x).max(1e-300))
        };
        xs[0] = a;
        cum[0] = 0.0;
        // Two-point Gauss per sub-interval: never samples the segment ends.
        let g = 0.5 / (3.0f64).sqrt();
        for m in 1..=M {
            let t0 = (m as f64 - 0.5 - g) / M as f64;
            let t1 = (m as f64 - 0.5 + g) / M as f64;
            cum[m] = cum[m - 1] + 0.5 * (integrand(t0).1 + integrand(t1).1) / M as f64;
            xs[m] = integrand(m as f64 / M as f64).0;
        }
        xs[M] = b;
        let total = cum[M];
        let n = (total.ceil() as usize).max(1);
        let mut idx = 0;
        for j in 1..n {
            let target = total * j as f64 / n as f64;
            while cum[idx + 1] < target {
                idx += 1;
            }
            let f = (target - cum[idx]) / (cum[idx + 1] - cum[idx]);
            nodes.push(xs[idx] + f * (xs[idx + 1] - xs[idx]));
        }
        nodes.push(b);
    }
    nodes
}

/// Node coordinates of a rectilinear grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl Grid {
    /// Grid adapted to a cross-section.
    pub fn for_geometry(geometry: &ChipCrossSection, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let d = &geometry.domain;
        let (bx, bz) = geometry.breakpoints();
        let mut wx = Vec::new();
        let mut wz = Vec::new();
        for w in &geometry.windows {
            wx.push(Window { lo: w.region.x0, hi: w.region.x1, h: w.spacing });
            wz.push(Window { lo: w.region.z0, hi: w.region.z1, h: w.spacing });
        }
        // Singular lines: conductor ends in x at the conductor heights, and vice versa.
        let mut ex = Vec::new();
        let mut ez = Vec::new();
        for c in &geometry.conductors {
            for x in [c.shape.x0, c.shape.x1] {
                if x > d.x0 && x < d.x1 {
                    ex.push(x);
                }
            }
            for z in [c.shape.z0, c.shape.z1] {
                if z > d.z0 && z < d.z1 {
                    ez.push(z);
                }
            }
        }
        // Windows also appear as breakpoints so their extent is honoured.
        let mut bx = bx;
        let mut bz = bz;
        for w in &geometry.windows {
            bx.extend([w.region.x0, w.region.x1]);
            bz.extend([w.region.z0, w.region.z1]);
        }
        let x = build_axis(d.x0, d.x1, &bx, &ex, wx, spec);
        let z = build_axis(d.z0, d.z1, &bz, &ez, wz, spec);
        Ok(Self { x, z })
    }

    /// Uniform grid, mainly for tests.
    pub fn uniform(x0: f64, x1: f64, nx: usize, z0: f64, z1: f64, nz: usize) -> Self {
        let lin = |a: f64, b: f64, n: usize| (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        Self { x: lin(x0, x1, nx), z: lin(z0, z1, nz) }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn nz(&self) -> usize {
        self.z.len()
    }
    pub fn len(&self) -> usize {
        self.x.len() * self.z.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest and largest spacing over both axes.
    pub fn spacing_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for ax in [&self.x, &self.z] {
            for w in ax.windows(2) {
                let h = w[1] - w[0];
                lo = lo.min(h);
                hi = hi.max(h);
            }
        }
        (lo, hi)
    }

    /// Index of the node nearest to `v` on an axis.
    pub fn nearest(axis: &[f64], v: f64) -> usize {
        let i = axis.partition_point(|&a| a < v);
        if i == 0 {
            0
        } else if i >= axis.len() {
            axis.len() - 1
        } else if (axis[i] - v).abs() < (v - axis[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    pub fn hash_into(&self, h: &mut Sha256) {
        h.update(b"axes");
        for ax in [&self.x, &self.z] {
            h.update((ax.len() as u64).to_le_bytes());
            for v in ax.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
}
