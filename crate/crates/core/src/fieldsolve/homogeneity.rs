//! Cloud-weighted field homogeneity
//! `η = sqrt(∫ ρ_sp (|E|/E0 - 1)² dV)` over the ±3σ box around the cloud centre.
//!
//! The ±3σ window is not renormalised: the weight outside it is dropped.

use super::map::FieldMap;
use crate::beam_trap::AtomCloud;
use crate::error::Result;
use crate::quadrature::GaussLegendre;

const NODES: usize = 24;

fn gaussian(u: f64, sigma: f64) -> f64 {
    (-0.5 * (u / sigma).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// Weight of one Gaussian axis inside ±3σ.
fn window_weight() -> f64 {
    libm::erf(3.0 / std::f64::consts::SQRT_2)
}

/// η for a translationally invariant cross-section (beam along `y`): the
/// field is taken constant along the cloud length.
pub fn homogeneity_eta(map: &FieldMap, cloud: &AtomCloud<f64>, center: (f64, f64)) -> Result<f64> {
    let e0 = map.field_at(center.0, center.1)?.magnitude;
    let s = cloud.sigma_r;
    let gl = GaussLegendre::new(NODES);
    let mut acc = 0.0;
    for (dz, wz) in gl.mapped(-3.0 * s, 3.0 * s) {
        for (dx, wx) in gl.mapped(-3.0 * s, 3.0 * s) {
            let e = map.field_at(center.0 + dx, center.1 + dz)?.magnitude;
            acc += wx * wz * gaussian(dx, s) * gaussian(dz, s) * (e / e0 - 1.0).powi(2);
        }
    }
    Ok((acc * window_weight()).sqrt())
}

/// η from a transverse (`x-z`) and a longitudinal (`y-z`) section of a
/// finite plate pair, with the field taken separable:
/// `E(x, y, z) = E_xz(x, z) · E_yz(y, z) / E0`.
pub fn homogeneity_eta_separable(
    transverse: &FieldMap,
    transverse_center: (f64, f64),
    longitudinal: &FieldMap,
    longitudinal_center: (f64, f64),
    cloud: &AtomCloud<f64>,
) -> Result<f64> {
    let et = transverse.field_at(transverse_center.0, transverse_center.1)?.magnitude;
    let el = longitudinal.field_at(longitudinal_center.0, longitudinal_center.1)?.magnitude;
    let (sr, sy) = (cloud.sigma_r, cloud.sigma_y);
    let gl = GaussLegendre::new(NODES);
    // Longitudinal factor depends on (y, z); transverse on (x, z).
    let ys: Vec<(f64, f64)> = gl.mapped(-3.0 * sy, 3.0 * sy).collect();
    let xs: Vec<(f64, f64)> = gl.mapped(-3.0 * sr, 3.0 * sr).collect();
    let mut acc = 0.0;
    for &(dz, wz) in &xs {
        let mut lf = Vec::with_capacity(ys.len());
        for &(dy, _) in &ys {
            lf.push(longitudinal.field_at(longitudinal_center.0 + dy, longitudinal_center.1 + dz)?.magnitude / el);
        }
        for &(dx, wx) in &xs {
            let tf = transverse.field_at(transverse_center.0 + dx, transverse_center.1 + dz)?.magnitude / et;
            let wxz = wx * wz * gaussian(dx, sr) * gaussian(dz, sr);
            for (&(dy, wy), l) in ys.iter().zip(&lf) {
                acc += wxz * wy * gaussian(dy, sy) * (tf * l - 1.0).powi(2);
            }
        }
    }
    Ok(acc.sqrt())
}
