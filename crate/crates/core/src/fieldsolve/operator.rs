//! Finite-volume discretisation of `∇·(ε∇φ) = 0` and its iterative solvers.
//!
//! Unknowns live on grid nodes; ε is constant per cell. The flux through the
//! face between two horizontal neighbours is weighted by the permittivities of
//! the two cells that face straddles, each over its half-height. Outer box
//! faces carry no flux, which is the zero-normal-field condition.

use serde::{Deserialize, Serialize};

use super::geometry::ChipCrossSection;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Linear solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    /// Conjugate gradients with incomplete-Cholesky preconditioning.
    Pcg,
    /// Red-black successive over-relaxation.
    Sor { omega: f64 },
}

/// Convergence controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative residual `‖r‖/‖b‖` to reach.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 20_000, method: Method::Pcg }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter { name: "tolerance", reason: "must lie in (0, 1)".into() });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter { name: "max_iterations", reason: "must be > 0".into() });
        }
        if let Method::Sor { omega } = self.method {
            if !(omega > 0.0 && omega < 2.0) {
                return Err(Error::InvalidParameter { name: "omega", reason: "must lie in (0, 2)".into() });
            }
        }
        Ok(())
    }
}

/// Marker for nodes that are not on a conductor.
pub const FREE: u32 = u32::MAX;

/// Assembled operator (ε0 omitted: coefficients are in units of ε_r).
#[derive(Debug, Clone)]
pub struct Operator {
    pub nx: usize,
    pub nz: usize,
    /// Coupling to the east neighbour `(i+1, j)`, indexed by node.
    pub east: Vec<f64>,
    /// Coupling to the north neighbour `(i, j+1)`, indexed by node.
    pub north: Vec<f64>,
    /// Cell permittivities, `(nx-1) × (nz-1)`, x fastest.
    pub eps: Vec<f64>,
    /// Conductor index per node, or [`FREE`].
    pub owner: Vec<u32>,
    /// Fixed potential per node (zero on free nodes).
    pub fixed: Vec<f64>,
}

impl Operator {
    pub fn assemble(geometry: &ChipCrossSection, grid: &Grid) -> Result<Self> {
        let (nx, nz) = (grid.nx(), grid.nz());
        if nx < 3 || nz < 3 {
            return Err(Error::Geometry("grid needs at least 3 nodes per axis".into()));
        }
        let hx: Vec<f64> = grid.x.windows(2).map(|w| w[1] - w[0]).collect();
        let hz: Vec<f64> = grid.z.windows(2).map(|w| w[1] - w[0]).collect();
        let mut eps = vec![1.0; (nx - 1) * (nz - 1)];
        for j in 0..nz - 1 {
            let zc = 0.5 * (grid.z[j] + grid.z[j + 1]);
            for i in 0..nx - 1 {
                let xc = 0.5 * (grid.x[i] + grid.x[i + 1]);
                eps[i + j * (nx - 1)] = geometry.eps_at(xc, zc);
            }
        }
        let cell = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i as usize >= nx - 1 || j as usize >= nz - 1 {
                0.0
            } else {
                eps[i as usize + j as usize * (nx - 1)]
            }
        };
        let hzh = |j: isize| if j < 0 || j as usize >= nz - 1 { 0.0 } else { 0.5 * hz[j as usize] };
        let hxh = |i: isize| if i < 0 || i as usize >= nx - 1 { 0.0 } else { 0.5 * hx[i as usize] };
        let mut east = vec![0.0; nx * nz];
        let mut north = vec![0.0; nx * nz];
        for j in 0..nz {
            for i in 0..nx {
                let (ii, jj) = (i as isize, j as isize);
                let k = i + j * nx;
                if i + 1 < nx {
                    east[k] = (cell(ii, jj - 1) * hzh(jj - 1) + cell(ii, jj) * hzh(jj)) / hx[i];
                }
                if j + 1 < nz {
                    north[k] = (cell(ii - 1, jj) * hxh(ii - 1) + cell(ii, jj) * hxh(ii)) / hz[j];
                }
            }
        }

        let mut owner = vec![FREE; nx * nz];
        let mut fixed = vec![0.0; nx * nz];
        let scale = geometry.domain.width().max(geometry.domain.height());
        let tol = 1e-9 * scale;
        for (ci, c) in geometry.conductors.iter().enumerate() {
            let i0 = grid.x.partition_point(|&x| x < c.shape.x0 - tol);
            let i1 = grid.x.partition_point(|&x| x <= c.shape.x1 + tol);
            let j0 = grid.z.partition_point(|&z| z < c.shape.z0 - tol);
            let j1 = grid.z.partition_point(|&z| z <= c.shape.z1 + tol);
            if i0 >= i1 || j0 >= j1 {
                return Err(Error::Geometry(format!("conductor '{}' covers no grid node", c.name)));
            }
            for j in j0..j1 {
                for i in i0..i1 {
                    let k = i + j * nx;
                    if owner[k] != FREE && owner[k] != ci as u32 {
                        return Err(Error::Geometry(format!(
                            "conductors '{}' and '{}' share a grid node",
                            geometry.conductors[owner[k] as usize].name, c.name
                        )));
                    }
                    owner[k] = ci as u32;
                    fixed[k] = c.potential;
                }
            }
        }
        Ok(Self { nx, nz, east, north, eps, owner, fixed })
    }

    #[inline]
    fn is_free(&self, k: usize) -> bool {
        self.owner[k] == FREE
    }

    fn diag(&self, k: usize) -> f64 {
        let (i, j) = (k % self.nx, k / self.nx);
        let mut d = self.east[k] + self.north[k];
        if i > 0 {
            d += self.east[k - 1];
        }
        if j > 0 {
            d += self.north[k - self.nx];
        }
        d
    }

    /// `(Aφ)_k` for the full operator at node `k`: net outward flux.
    pub fn apply_at(&self, phi: &[f64], k: usize) -> f64 {
        let (nx, i, j) = (self.nx, k % self.nx, k / self.nx);
        let p = phi[k];
        let mut s = 0.0;
        if i + 1 < nx {
            s += self.east[k] * (p - phi[k + 1]);
        }
        if i > 0 {
            s += self.east[k - 1] * (p - phi[k - 1]);
        }
        if j + 1 < self.nz {
            s += self.north[k] * (p - phi[k + nx]);
        }
        if j > 0 {
            s += self.north[k - nx] * (p - phi[k - nx]);
        }
        s
    }

    /// Maximum of `|Aφ|` over free nodes relative to the largest diagonal flux scale.
    pub fn relative_residual(&self, phi: &[f64]) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        let span = self.fixed.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for k in 0..phi.len() {
            if self.is_free(k) {
                num += self.apply_at(phi, k).powi(2);
                den += (self.diag(k) * span).powi(2);
            }
        }
        (num / den.max(1e-300)).sqrt()
    }

    /// Free-node matrix-vector product; `x` and `y` are zero on fixed nodes.
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.nx;
        for j in 0..self.nz {
            for i in 0..nx {
                let k = i + j * nx;
                if !self.is_free(k) {
                    y[k] = 0.0;
                    continue;
                }
                let mut s = self.diag(k) * x[k];
                if i + 1 < nx {
                    s -= self.east[k] * x[k + 1];
                }
                if i > 0 {
                    s -= self.east[k - 1] * x[k - 1];
                }
                if j + 1 < self.nz {
                    s -= self.north[k] * x[k + nx];
                }
                if j > 0 {
                    s -= self.north[k - nx] * x[k - nx];
                }
                y[k] = s;
            }
        }
    }

    /// Right-hand side from the fixed potentials.
    fn rhs(&self) -> Vec<f64> {
        let nx = self.nx;
        let mut b = vec![0.0; self.fixed.len()];
        for k in 0..b.len() {
            if !self.is_free(k) {
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let mut s = 0.0;
            if i + 1 < nx && !self.is_free(k + 1) {
                s += self.east[k] * self.fixed[k + 1];
            }
            if i > 0 && !self.is_free(k - 1) {
                s += self.east[k - 1] * self.fixed[k - 1];
            }
            if j + 1 < self.nz && !self.is_free(k + nx) {
                s += self.north[k] * self.fixed[k + nx];
            }
            if j > 0 && !self.is_free(k - nx) {
                s += self.north[k - nx] * self.fixed[k - nx];
            }
            b[k] = s;
        }
        b
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-fill incomplete Cholesky of the free-node matrix, `M = (D+L) D⁻¹ (D+Lᵀ)`.
struct Ic0 {
    inv_d: Vec<f64>,
}

impl Ic0 {
    fn new(op: &Operator) -> Result<Self> {
        let nx = op.nx;
        let n = op.fixed.len();
        let mut d = vec![0.0; n];
        for k in 0..n {
            if !op.is_free(k) {
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let mut v = op.diag(k);
            if i > 0 && op.is_free(k - 1) {
                v -= op.east[k - 1].powi(2) / d[k - 1];
            }
            if j > 0 && op.is_free(k - nx) {
                v -= op.north[k - nx].powi(2) / d[k - nx];
            }
            if !(v > 0.0) {
                return Err(Error::Geometry("node not connected to the domain (zero flux coefficients)".into()));
            }
            d[k] = v;
        }
        Ok(Self { inv_d: d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect() })
    }

    fn apply(&self, op: &Operator, r: &[f64], z: &mut [f64]) {
        let nx = op.nx;
        let n = r.len();
        // forward: (D+L) w = r
        for k in 0..n {
            if !op.is_free(k) {
                z[k] = 0.0;
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let mut s = r[k];
            if i > 0 && op.is_free(k - 1) {
                s += op.east[k - 1] * z[k - 1];
            }
            if j > 0 && op.is_free(k - nx) {
                s += op.north[k - nx] * z[k - nx];
            }
            z[k] = s * self.inv_d[k];
        }
        // backward: (D+Lᵀ) z = D w
        for k in (0..n).rev() {
            if !op.is_free(k) {
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let mut s = 0.0;
            if i + 1 < nx && op.is_free(k + 1) {
                s += op.east[k] * z[k + 1];
            }
            if j + 1 < op.nz && op.is_free(k + nx) {
                s += op.north[k] * z[k + nx];
            }
            z[k] += s * self.inv_d[k];
        }
    }
}

/// Solves for the node potentials.
pub fn solve(op: &Operator, settings: &SolverSettings) -> Result<Solution> {
    settings.validate()?;
    if op.owner.iter().all(|&o| o == FREE) {
        return Err(Error::Geometry("no fixed-potential nodes".into()));
    }
    match settings.method {
        Method::Pcg => pcg(op, settings),
        Method::Sor { omega } => sor(op, settings, omega),
    }
}

fn pcg(op: &Operator, settings: &SolverSettings) -> Result<Solution> {
    let n = op.fixed.len();
    let b = op.rhs();
    let bnorm = dot(&b, &b).sqrt();
    let mut u = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(Solution { phi: op.fixed.clone(), iterations: 0, residual: 0.0, history });
    }
    let pre = Ic0::new(op)?;
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    pre.apply(op, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    let mut it = 0;
    while it < settings.max_iterations {
        op.matvec(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        it += 1;
        res = dot(&r, &r).sqrt() / bnorm;
        history.push(res);
        if res < settings.tolerance {
            break;
        }
        pre.apply(op, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if !(res < settings.tolerance) {
        return Err(Error::NotConverged { iterations: it, residual: res, history: thin(history) });
    }
    let phi: Vec<f64> = (0..n).map(|k| if op.is_free(k) { u[k] } else { op.fixed[k] }).collect();
    Ok(Solution { phi, iterations: it, residual: res, history: thin(history) })
}

fn sor(op: &Operator, settings: &SolverSettings, omega: f64) -> Result<Solution> {
    let n = op.fixed.len();
    let nx = op.nx;
    let b = op.rhs();
    let bnorm = dot(&b, &b).sqrt();
    let mut phi = op.fixed.clone();
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(Solution { phi, iterations: 0, residual: 0.0, history });
    }
    let diag: Vec<f64> = (0..n).map(|k| op.diag(k)).collect();
    let mut res = 1.0;
    let mut it = 0;
    while it < settings.max_iterations {
        for colour in 0..2 {
            for j in 0..op.nz {
                let start = (j + colour) % 2;
                for i in (start..nx).step_by(2) {
                    let k = i + j * nx;
                    if !op.is_free(k) {
                        continue;
                    }
                    let r = op.apply_at(&phi, k);
                    phi[k] -= omega * r / diag[k];
                }
            }
        }
        it += 1;
        // Residual every few sweeps; it costs as much as a sweep.
        if it % 10 == 0 || it == settings.max_iterations {
            let mut s = 0.0;
            for k in 0..n {
                if op.is_free(k) {
                    s += op.apply_at(&phi, k).powi(2);
                }
            }
            res = s.sqrt() / bnorm;
            history.push(res);
            if res < settings.tolerance {
                break;
            }
        }
    }
    if !(res < settings.tolerance) {
        return Err(Error::NotConverged { iterations: it, residual: res, history: thin(history) });
    }
    Ok(Solution { phi, iterations: it, residual: res, history: thin(history) })
}

/// Keeps at most ~200 entries of a residual history.
fn thin(h: Vec<f64>) -> Vec<f64> {
    if h.len() <= 200 {
        return h;
    }
    let step = h.len().div_ceil(200);
    let last = *h.last().unwrap();
    let mut out: Vec<f64> = h.into_iter().step_by(step).collect();
    out.push(last);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsolve::geometry::{Conductor, Rect};

    fn box_geometry() -> ChipCrossSection {
        ChipCrossSection {
            conductors: vec![
                Conductor { name: "left".into(), shape: Rect::new(0.0, 0.0, 0.0, 1.0), potential: 1.0 },
                Conductor { name: "right".into(), shape: Rect::new(1.0, 1.0, 0.0, 1.0), potential: 0.0 },
            ],
            dielectrics: vec![],
            domain: Rect::new(0.0, 1.0, 0.0, 1.0),
            windows: vec![],
            probe: (0.5, 0.5),
            params: Default::default(),
        }
    }

    #[test]
    fn linear_profile_between_walls() {
        let g = box_geometry();
        let grid = Grid { x: vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0], z: vec![0.0, 0.3, 0.4, 1.0] };
        let op = Operator::assemble(&g, &grid).unwrap();
        for method in [Method::Pcg, Method::Sor { omega: 1.5 }] {
            let s = solve(&op, &SolverSettings { tolerance: 1e-12, max_iterations: 10_000, method }).unwrap();
            for j in 0..grid.nz() {
                for i in 0..grid.nx() {
                    let v = s.phi[i + j * grid.nx()];
                    assert!((v - (1.0 - grid.x[i])).abs() < 1e-10, "{method:?} {i} {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn layered_dielectric_series_profile() {
        // ε = 1 for x < 0.5 and 3 beyond: field ratio 3 : 1
        let mut g = box_geometry();
        g.dielectrics.push(crate::fieldsolve::geometry::Dielectric { region: Rect::new(0.5, 1.0, 0.0, 1.0), eps_r: 3.0 });
        let grid = Grid::uniform(0.0, 1.0, 11, 0.0, 1.0, 5);
        let op = Operator::assemble(&g, &grid).unwrap();
        let s = solve(&op, &SolverSettings::default()).unwrap();
        // φ(0.5) = 1 - 0.5 E1 with E1 = 1.5 → 0.25
        let mid = s.phi[5 + 2 * 11];
        assert!((mid - 0.25).abs() < 1e-9, "{mid}");
    }

    #[test]
    fn non_convergence_reports_history() {
        let g = box_geometry();
        let grid = Grid::uniform(0.0, 1.0, 40, 0.0, 1.0, 40);
        let op = Operator::assemble(&g, &grid).unwrap();
        let e = solve(&op, &SolverSettings { tolerance: 1e-12, max_iterations: 3, method: Method::Pcg }).unwrap_err();
        match e {
            Error::NotConverged { iterations, history, .. } => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_solution_when_all_fixed_equal() {
        let mut g = box_geometry();
        g.conductors[1].potential = 1.0;
        let grid = Grid::uniform(0.0, 1.0, 9, 0.0, 1.0, 9);
        let op = Operator::assemble(&g, &grid).unwrap();
        let s = solve(&op, &SolverSettings::default()).unwrap();
        assert!(s.phi.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}
