use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use super::operator::{Operator, FREE};
use crate::constants::EPSILON_0;
use crate::error::{Error, Result};

/// Largest accepted disagreement between energy and charge capacitance.
pub const CAPACITANCE_AGREEMENT: f64 = 0.02;

/// Interpolated field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub ex: f64,
    pub ez: f64,
    pub magnitude: f64,
}

/// Capacitance per unit length by both routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitanceReport {
    /// From the stored field energy, `2W'/V²`.
    pub energy: f64,
    /// From the net flux leaving the conductor, `Q'/V`.
    pub charge: f64,
    pub rel_diff: f64,
}

/// Solved potential and field on a rectilinear grid.
///
/// Maps read back from CSV carry no conductor data and cannot report
/// capacitances.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Node potentials, x fastest.
    pub phi: Vec<f64>,
    pub ex: Vec<f64>,
    pub ez: Vec<f64>,
    /// Potential span `max - min` over the conductors, used for per-volt ratios.
    pub voltage_span: f64,
    pub residual: f64,
    pub iterations: usize,
    pub geometry_hash: String,
    operator: Option<Arc<Operator>>,
}

fn derivative(axis: &[f64], f: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = axis.len();
    if i == 0 {
        (f(1) - f(0)) / (axis[1] - axis[0])
    } else if i == n - 1 {
        (f(n - 1) - f(n - 2)) / (axis[n - 1] - axis[n - 2])
    } else {
        let hm = axis[i] - axis[i - 1];
        let hp = axis[i + 1] - axis[i];
        (hm * hm * f(i + 1) - hp * hp * f(i - 1) + (hp * hp - hm * hm) * f(i)) / (hm * hp * (hm + hp))
    }
}

fn fields_from_potential(x: &[f64], z: &[f64], phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, nz) = (x.len(), z.len());
    let mut ex = vec![0.0; nx * nz];
    let mut ez = vec![0.0; nx * nz];
    for j in 0..nz {
        for i in 0..nx {
            let k = i + j * nx;
            ex[k] = -derivative(x, |ii| phi[ii + j * nx], i);
            ez[k] = -derivative(z, |jj| phi[i + jj * nx], j);
        }
    }
    (ex, ez)
}

impl FieldMap {
    pub(crate) fn from_solution(
        x: Vec<f64>,
        z: Vec<f64>,
        phi: Vec<f64>,
        voltage_span: f64,
        residual: f64,
        iterations: usize,
        geometry_hash: String,
        operator: Arc<Operator>,
    ) -> Self {
        let (ex, ez) = fields_from_potential(&x, &z, &phi);
        Self { x, z, phi, ex, ez, voltage_span, residual, iterations, geometry_hash, operator: Some(operator) }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn nz(&self) -> usize {
        self.z.len()
    }

    fn locate(&self, x: f64, z: f64) -> Result<(usize, usize, f64, f64)> {
        let (nx, nz) = (self.nx(), self.nz());
        if !(x >= self.x[0] && x <= self.x[nx - 1] && z >= self.z[0] && z <= self.z[nz - 1]) {
            return Err(Error::OutOfDomain { x, z });
        }
        let i = (self.x.partition_point(|&v| v <= x) - 1).min(nx - 2);
        let j = (self.z.partition_point(|&v| v <= z) - 1).min(nz - 2);
        let tx = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        let tz = (z - self.z[j]) / (self.z[j + 1] - self.z[j]);
        Ok((i, j, tx, tz))
    }

    fn bilinear(&self, v: &[f64], i: usize, j: usize, tx: f64, tz: f64) -> f64 {
        let nx = self.nx();
        let k = i + j * nx;
        (1.0 - tx) * (1.0 - tz) * v[k] + tx * (1.0 - tz) * v[k + 1] + (1.0 - tx) * tz * v[k + nx] + tx * tz * v[k + nx + 1]
    }

    /// Field at `(x, z)`, bilinear in the node values of each component.
    pub fn field_at(&self, x: f64, z: f64) -> Result<FieldSample> {
        let (i, j, tx, tz) = self.locate(x, z)?;
        let ex = self.bilinear(&self.ex, i, j, tx, tz);
        let ez = self.bilinear(&self.ez, i, j, tx, tz);
        Ok(FieldSample { ex, ez, magnitude: ex.hypot(ez) })
    }

    /// `|E| / V` at `(x, z)`, in 1/m.
    pub fn field_per_volt(&self, x: f64, z: f64) -> Result<f64> {
        if !(self.voltage_span > 0.0) {
            return Err(Error::InvalidParameter { name: "voltage_span", reason: "conductors share one potential".into() });
        }
        Ok(self.field_at(x, z)?.magnitude / self.voltage_span)
    }

    pub fn potential_at(&self, x: f64, z: f64) -> Result<f64> {
        let (i, j, tx, tz) = self.locate(x, z)?;
        Ok(self.bilinear(&self.phi, i, j, tx, tz))
    }

    fn operator(&self) -> Result<&Operator> {
        self.operator
            .as_deref()
            .ok_or_else(|| Error::Format("field map carries no conductor data (imported from file?)".into()))
    }

    /// Largest and smallest node potential and the conductor potential range.
    pub fn potential_bounds(&self) -> Result<((f64, f64), (f64, f64))> {
        let op = self.operator()?;
        let (mut flo, mut fhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, &o) in op.owner.iter().enumerate() {
            if o != FREE {
                flo = flo.min(op.fixed[k]);
                fhi = fhi.max(op.fixed[k]);
            }
        }
        let lo = self.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(((lo, hi), (flo, fhi)))
    }

    /// Discrete maximum principle with a tolerance relative to the span.
    pub fn satisfies_maximum_principle(&self, rel_tol: f64) -> Result<bool> {
        let ((lo, hi), (flo, fhi)) = self.potential_bounds()?;
        let slack = rel_tol * (fhi - flo).abs().max(fhi.abs()).max(1e-300);
        Ok(lo >= flo - slack && hi <= fhi + slack)
    }

    /// Field energy per unit length `½∫ε|∇φ|²` with `φ` bilinear on each cell.
    pub fn energy_per_length(&self) -> Result<f64> {
        let op = self.operator()?;
        let (nx, nz) = (self.nx(), self.nz());
        let mut w = 0.0;
        for j in 0..nz - 1 {
            let hz = self.z[j + 1] - self.z[j];
            for i in 0..nx - 1 {
                let hx = self.x[i + 1] - self.x[i];
                let k = i + j * nx;
                let (p00, p10, p01, p11) = (self.phi[k], self.phi[k + 1], self.phi[k + nx], self.phi[k + nx + 1]);
                let (a, b) = (p10 - p00, p11 - p01);
                let (c, d) = (p01 - p00, p11 - p10);
                let cell = hz / hx * (a * a + a * b + b * b) / 3.0 + hx / hz * (c * c + c * d + d * d) / 3.0;
                w += op.eps[i + j * (nx - 1)] * cell;
            }
        }
        Ok(0.5 * EPSILON_0 * w)
    }

    /// Charge per unit length on conductor `id`.
    pub fn charge_per_length(&self, id: usize) -> Result<f64> {
        let op = self.operator()?;
        let mut q = 0.0;
        let mut any = false;
        for (k, &o) in op.owner.iter().enumerate() {
            if o == id as u32 {
                any = true;
                q += op.apply_at(&self.phi, k);
            }
        }
        if !any {
            return Err(Error::InvalidParameter { name: "conductor_id", reason: format!("no conductor {id}") });
        }
        Ok(EPSILON_0 * q)
    }

    /// Capacitance per length of conductor `id`, which must be the only
    /// conductor at a nonzero potential.
    pub fn capacitance_report(&self, id: usize) -> Result<CapacitanceReport> {
        let op = self.operator()?;
        let mut v_live = None;
        for (k, &o) in op.owner.iter().enumerate() {
            if o == FREE {
                continue;
            }
            let v = op.fixed[k];
            if o == id as u32 {
                v_live = Some(v);
            } else if v != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "conductor_id",
                    reason: "all other conductors must be grounded".into(),
                });
            }
        }
        let v = v_live.ok_or_else(|| Error::InvalidParameter { name: "conductor_id", reason: format!("no conductor {id}") })?;
        if v == 0.0 {
            return Err(Error::InvalidParameter { name: "conductor_id", reason: "conductor is grounded".into() });
        }
        let energy = 2.0 * self.energy_per_length()? / (v * v);
        let charge = self.charge_per_length(id)? / v;
        let rel_diff = (energy - charge).abs() / charge.abs().max(1e-300);
        Ok(CapacitanceReport { energy, charge, rel_diff })
    }

    /// Cross-checked capacitance per length; fails when the two routes disagree
    /// by more than [`CAPACITANCE_AGREEMENT`].
    pub fn capacitance_per_length(&self, id: usize) -> Result<f64> {
        let r = self.capacitance_report(id)?;
        if r.rel_diff > CAPACITANCE_AGREEMENT {
            return Err(Error::UnderResolved { energy: r.energy, charge: r.charge, rel_diff: r.rel_diff });
        }
        Ok(r.charge)
    }

    /// Writes the CSV grid export.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "# rydcav field map")?;
        writeln!(out, "# nx={} nz={}", self.nx(), self.nz())?;
        writeln!(out, "# geometry_hash={}", self.geometry_hash)?;
        writeln!(out, "# voltage_span_V={:e}", self.voltage_span)?;
        writeln!(out, "# units: x_m [m], z_m [m], phi_V [V], Ex_V_per_m [V/m], Ez_V_per_m [V/m]")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_m", "z_m", "phi_V", "Ex_V_per_m", "Ez_V_per_m"]).map_err(csv_err)?;
        let nx = self.nx();
        for j in 0..self.nz() {
            for i in 0..nx {
                let k = i + j * nx;
                w.write_record(&[
                    format!("{:e}", self.x[i]),
                    format!("{:e}", self.z[j]),
                    format!("{:e}", self.phi[k]),
                    format!("{:e}", self.ex[k]),
                    format!("{:e}", self.ez[k]),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV grid export written by [`FieldMap::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut hash = String::new();
        let mut span = 1.0;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(h) = meta.strip_prefix("geometry_hash=") {
                    hash = h.to_string();
                } else if let Some(v) = meta.strip_prefix("voltage_span_V=") {
                    span = v.parse().map_err(|_| Error::Format(format!("bad voltage span '{v}'")))?;
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let headers = rd.headers().map_err(csv_err)?.clone();
        let expected = ["x_m", "z_m", "phi_V", "Ex_V_per_m", "Ez_V_per_m"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Format(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let mut v = [0.0; 5];
            for (slot, field) in v.iter_mut().zip(rec.iter()) {
                *slot = field.trim().parse().map_err(|_| Error::Format(format!("bad number '{field}'")))?;
            }
            rows.push(v);
        }
        if rows.is_empty() {
            return Err(Error::Format("empty field map".into()));
        }
        let nx = rows.iter().position(|r| r[1] != rows[0][1]).unwrap_or(rows.len());
        if nx < 2 || rows.len() % nx != 0 {
            return Err(Error::Format("rows do not form a rectilinear grid".into()));
        }
        let nz = rows.len() / nx;
        let x: Vec<f64> = rows[..nx].iter().map(|r| r[0]).collect();
        let z: Vec<f64> = (0..nz).map(|j| rows[j * nx][1]).collect();
        for (k, r) in rows.iter().enumerate() {
            if r[0] != x[k % nx] || r[1] != z[k / nx] {
                return Err(Error::Format(format!("row {} breaks the grid ordering", k + 1)));
            }
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("grid axes must be strictly increasing".into()));
        }
        Ok(Self {
            phi: rows.iter().map(|r| r[2]).collect(),
            ex: rows.iter().map(|r| r[3]).collect(),
            ez: rows.iter().map(|r| r[4]).collect(),
            x,
            z,
            voltage_span: span,
            residual: f64::NAN,
            iterations: 0,
            geometry_hash: hash,
            operator: None,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
