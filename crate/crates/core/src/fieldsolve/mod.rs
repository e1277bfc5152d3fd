//! 2D electrostatics of chip cross-sections.
//!
//! A cross-section is a set of equipotential conductors (axis-aligned, zero
//! thickness allowed) inside a box with piecewise-constant permittivity. The
//! potential is solved by finite volumes on a graded grid; the resulting
//! [`FieldMap`] gives per-volt fields, capacitance per unit length and the
//! homogeneity metric η.

mod cache;
pub mod geometry;
pub mod grid;
pub mod homogeneity;
pub mod map;
pub mod operator;

use std::sync::Arc;

use sha2::{Digest, Sha256};

pub use cache::SolveCache;
pub use geometry::{ChipCrossSection, Conductor, Dielectric, FlipChipLayout, PlanarLayout, Rect, RefineWindow};
pub use grid::{Grid, GridSpec};
pub use homogeneity::{homogeneity_eta, homogeneity_eta_separable};
pub use map::{CapacitanceReport, FieldMap, FieldSample};
pub use operator::{Method, SolverSettings};

use crate::error::Result;

/// Cache key: layout, grid and solver settings.
pub fn solve_key(geometry: &ChipCrossSection, spec: &GridSpec, settings: &SolverSettings) -> String {
    let mut h = Sha256::new();
    geometry.hash_into(&mut h);
    spec.hash_into(&mut h);
    h.update(b"solver");
    h.update(settings.tolerance.to_bits().to_le_bytes());
    h.update((settings.max_iterations as u64).to_le_bytes());
    match settings.method {
        Method::Pcg => h.update(b"pcg"),
        Method::Sor { omega } => {
            h.update(b"sor");
            h.update(omega.to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// Digest of the layout alone.
pub fn geometry_hash(geometry: &ChipCrossSection) -> String {
    let mut h = Sha256::new();
    geometry.hash_into(&mut h);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Solves a cross-section on a grid generated from `spec`.
pub fn solve(geometry: &ChipCrossSection, spec: &GridSpec, settings: &SolverSettings) -> Result<FieldMap> {
    geometry.validate()?;
    let grid = Grid::for_geometry(geometry, spec)?;
    solve_on_grid(geometry, grid, settings)
}

/// Solves a cross-section on an explicit grid.
pub fn solve_on_grid(geometry: &ChipCrossSection, grid: Grid, settings: &SolverSettings) -> Result<FieldMap> {
    geometry.validate()?;
    settings.validate()?;
    let op = operator::Operator::assemble(geometry, &grid)?;
    let sol = operator::solve(&op, settings)?;
    log::debug!(
        "field solve: {}x{} nodes, {} iterations, residual {:.2e}",
        grid.nx(),
        grid.nz(),
        sol.iterations,
        sol.residual
    );
    Ok(FieldMap::from_solution(
        grid.x,
        grid.z,
        sol.phi,
        geometry.voltage_span(),
        sol.residual,
        sol.iterations,
        geometry_hash(geometry),
        Arc::new(op),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::EPSILON_0;

    fn coarse() -> GridSpec {
        GridSpec { h_edge_m: 4e-6, h_max_m: 200e-6, growth: 1.3, refine_level: 0 }
    }

    #[test]
    fn superposition_is_exact() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        let m1 = solve(&g, &coarse(), &SolverSettings::default()).unwrap();
        let m2 = solve(&g.with_voltage_scale(2.0), &coarse(), &SolverSettings::default()).unwrap();
        let worst = m1.phi.iter().zip(&m2.phi).map(|(a, b)| (2.0 * a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        let r1 = m1.field_per_volt(0.0, 30e-6).unwrap();
        let r2 = m2.field_per_volt(0.0, 30e-6).unwrap();
        assert!((r1 - r2).abs() < 1e-8 * r1);
    }

    #[test]
    fn uniform_potential_everywhere() {
        let mut g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        for c in &mut g.conductors {
            c.potential = 1.0;
        }
        let m = solve(&g, &coarse(), &SolverSettings::default()).unwrap();
        let worst = m.phi.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        // Smooth error modes survive a 1e-10 residual on strongly graded grids.
        assert!(worst < 1e-6, "{worst} it {} res {}", m.iterations, m.residual);
    }

    #[test]
    fn symmetric_line_has_no_tangential_field_on_axis() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        let m = solve(&g, &coarse(), &SolverSettings::default()).unwrap();
        let s = m.field_at(0.0, 15e-6).unwrap();
        assert!(s.ex.abs() < 1e-3 * s.magnitude);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        let m = solve(&g, &coarse(), &SolverSettings::default()).unwrap();
        assert!(matches!(m.field_at(3e-3, 0.0), Err(crate::Error::OutOfDomain { .. })));
    }

    #[test]
    fn csv_roundtrip() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        let m = solve(&g, &coarse(), &SolverSettings::default()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FieldMap::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.phi, m.phi);
        assert_eq!(back.geometry_hash, m.geometry_hash);
        assert_eq!(back.field_at(1e-5, 2e-5).unwrap(), m.field_at(1e-5, 2e-5).unwrap());
        assert!(back.capacitance_per_length(0).is_err());
    }

    #[test]
    fn capacitance_is_positive_and_cross_checked() {
        let g = ChipCrossSection::coplanar(20e-6, 10e-6, 10.0, 2e-3).unwrap();
        // The 10 µm gap needs one refinement level below the default grid.
        let m = solve(&g, &GridSpec::default().refined(1), &SolverSettings::default()).unwrap();
        let r = m.capacitance_report(0).unwrap();
        assert!(r.charge > 10.0 * EPSILON_0);
        assert!(r.rel_diff < map::CAPACITANCE_AGREEMENT, "{r:?}");
        assert!(m.capacitance_report(1).is_err());
    }
}
