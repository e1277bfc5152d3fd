//! Invariants checked over randomised inputs.

use num_complex::Complex64;
use proptest::prelude::*;
use rydcav::beam_trap::{self, AtomCloud, AtomicSpecies, GaussianBeam};
use rydcav::circuit::{design_for_frequency, ResonatorModel};
use rydcav::constants::{EPSILON_0, TWO_PI};
use rydcav::error::Result;
use rydcav::exposure::{self, ChipSurfaces};
use rydcav::fieldsolve::{self, homogeneity_eta, ChipCrossSection, GridSpec, SolveCache, SolverSettings};
use rydcav::optimize::{sweep_flipchip, sweep_planar, CrossSectionModel, FieldSummary, SweepConfig};
use rydcav::resfit::{ideal_response, synth_trace, ResonanceParams};

fn beam(power: f64, waist: f64, z0: f64) -> GaussianBeam<f64> {
    GaussianBeam::new(800e-9, waist, power, z0).unwrap()
}

fn surfaces() -> impl Strategy<Value = ChipSurfaces> {
    prop_oneof![Just(ChipSurfaces::Single), Just(ChipSurfaces::Double)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direct_power_falls_with_height_and_grows_with_width(
        waist in 5e-6..40e-6f64,
        z0 in 10e-6..200e-6f64,
        dz in 1e-7..50e-6f64,
        l in 0.0..5e-3f64,
        dl in 1e-5..2e-3f64,
        s in surfaces(),
    ) {
        let b = beam(0.05, waist, z0);
        let p = exposure::direct_power_on(&b, z0, l, s).unwrap();
        prop_assert!(exposure::direct_power_on(&b, z0 + dz, l, s).unwrap() <= p);
        prop_assert!(exposure::direct_power_on(&b, z0, l + dl, s).unwrap() >= p);
        prop_assert!(p <= b.power());
    }

    #[test]
    fn critical_width_inverts_the_direct_power(
        waist in 8e-6..25e-6f64,
        z0 in 60e-6..200e-6f64,
        log_limit in -13.0..-8.0f64,
        s in surfaces(),
    ) {
        let b = beam(0.05, waist, z0);
        let limit = 10f64.powf(log_limit);
        match exposure::critical_chip_width(&b, z0, limit, s) {
            Ok(l) => {
                let p = exposure::direct_power_on(&b, z0, l, s).unwrap();
                prop_assert!((p / limit - 1.0).abs() < 1e-5, "{p} vs {limit}");
            }
            // No width is safe: even a point-like chip exceeds the limit.
            Err(_) => prop_assert!(exposure::direct_power_on(&b, z0, 0.0, s).unwrap() > limit * (1.0 - 1e-6)),
        }
    }

    #[test]
    fn scattered_power_is_linear_in_atom_number(n1 in 0.0..1e7f64, n2 in 0.0..1e7f64, power in 1e-3..0.2f64) {
        let b = beam(power, 15e-6, 80e-6);
        let sp = AtomicSpecies::rubidium87();
        let p = |n| exposure::scattered_power(&b, &sp, n).unwrap();
        let sum = p(n1 + n2);
        prop_assert!((sum - p(n1) - p(n2)).abs() <= 1e-12 * sum.abs().max(1e-300));
    }

    #[test]
    fn trap_depth_scales_with_power_and_single_precision_agrees(power in 1e-3..0.5f64, waist in 5e-6..40e-6f64) {
        let sp = AtomicSpecies::rubidium87();
        let d1 = beam_trap::trap_depth_kelvin(&beam(power, waist, 80e-6), &sp).unwrap();
        let d2 = beam_trap::trap_depth_kelvin(&beam(2.0 * power, waist, 80e-6), &sp).unwrap();
        prop_assert!((d2 / d1 - 2.0).abs() < 1e-12);
        let b32 = GaussianBeam::<f32>::new(800e-9, waist as f32, power as f32, 80e-6).unwrap();
        let d32 = beam_trap::trap_depth_kelvin(&b32, &AtomicSpecies::<f32>::rubidium87()).unwrap();
        prop_assert!((d32 as f64 / d1 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn designed_resonator_obeys_the_lc_relation(c0 in 20e-15..500e-15f64, f in 6e9..14e9f64) {
        let m = ResonatorModel::new(c0, 1e-3).unwrap();
        if let Ok(sol) = design_for_frequency(&m, TWO_PI * f) {
            prop_assert!((sol.inductance * sol.omega0 * sol.omega0 * sol.capacitance - 1.0).abs() < 1e-12);
            let check = m.with_wire_length(sol.wire_length).unwrap().solve().unwrap();
            prop_assert!((check.omega0 / (TWO_PI * f) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_response_lies_on_its_circle(ki in 1e4..1e8f64, ke in 1e4..1e8f64, x in -50.0..50.0f64) {
        let w0 = TWO_PI * 10e9;
        let k = ki + ke;
        let z = ideal_response(w0, ki, ke, w0 + x * k);
        let centre = Complex64::new(-1.0 + ke / k, 0.0);
        prop_assert!(((z - centre).norm() - ke / k).abs() < 1e-12);
    }

    #[test]
    fn rebasing_leaves_the_background_unchanged(shift in -1e8..1e8f64, dw in -1e8..1e8f64) {
        let mut p = ResonanceParams::ideal(7e10, 1e6, 2e6);
        p.a0 = 0.9;
        p.a1 = 3e-9;
        p.a2 = -2e-17;
        p.phi0 = 0.3;
        p.phi1 = 1e-8;
        let q = p.rebased(p.omega_ref + shift);
        let w = p.omega0 + dw;
        prop_assert!((p.background(w) - q.background(w)).norm() < 1e-12);
    }

    #[test]
    fn synthetic_traces_are_reproducible(seed in any::<u64>(), sigma in 0.0..0.05f64) {
        let p = ResonanceParams::from_quality(TWO_PI * 11e9, 5e3, 1.8e4).unwrap();
        let k = p.kappa();
        let a = synth_trace(&p, p.omega0 - 5.0 * k, p.omega0 + 5.0 * k, 101, sigma, seed).unwrap();
        let b = synth_trace(&p, p.omega0 - 5.0 * k, p.omega0 + 5.0 * k, 101, sigma, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Analytic stand-in for the field solver so that sweeps run instantly.
struct Analytic;

impl CrossSectionModel for Analytic {
    fn planar(&self, a: f64, b: f64, l: f64, _: Option<&AtomCloud<f64>>) -> Result<FieldSummary> {
        Ok(FieldSummary {
            capacitance: (60e-12 + 0.5e-6 * a - 0.2e-6 * b) * l,
            field_per_volt: 3000.0 * a / (a + 40e-6) * b / (b + 30e-6),
            eta: None,
            capacitance_rel_diff: 0.0,
            iterations: 0,
        })
    }

    fn flipchip(&self, d: f64, a: f64, l: f64, _: Option<&AtomCloud<f64>>) -> Result<FieldSummary> {
        Ok(FieldSummary {
            capacitance: 1.2 * EPSILON_0 * a * l / d,
            field_per_volt: 1.0 / d,
            eta: None,
            capacitance_rel_diff: 0.0,
            iterations: 0,
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sweep_tables_ignore_input_order_and_thread_count(
        a in prop::collection::hash_set(2u32..15, 1..6),
        b in prop::collection::hash_set(2u32..11, 1..6),
        jobs in 1usize..4,
    ) {
        let a: Vec<f64> = a.into_iter().map(|v| v as f64 * 10.0 / 1e6).collect();
        let b: Vec<f64> = b.into_iter().map(|v| v as f64 * 10.0 / 1e6).collect();
        let (mut ra, mut rb) = (a.clone(), b.clone());
        ra.reverse();
        rb.reverse();
        let serial = SweepConfig { jobs: Some(1), ..Default::default() };
        let par = SweepConfig { jobs: Some(jobs), ..Default::default() };
        prop_assert_eq!(sweep_planar(&Analytic, &a, &b, &serial).unwrap(), sweep_planar(&Analytic, &ra, &rb, &par).unwrap());
        let d: Vec<f64> = b.iter().map(|x| 10.0 * x).collect();
        let mut rd = d.clone();
        rd.reverse();
        prop_assert_eq!(sweep_flipchip(&Analytic, &d, &serial).unwrap(), sweep_flipchip(&Analytic, &rd, &par).unwrap());
    }
}

// Field-solver properties on a small plate pair; fewer cases since each one solves.

fn plates() -> ChipCrossSection {
    ChipCrossSection::parallel_plates(500e-6, 50e-6, 5e-3).unwrap()
}

fn coarse() -> GridSpec {
    GridSpec { h_edge_m: 5e-6, h_max_m: 250e-6, growth: 1.3, refine_level: 0 }
}

fn scaled_spec(s: &GridSpec, k: f64) -> GridSpec {
    GridSpec { h_edge_m: s.h_edge_m * k, h_max_m: s.h_max_m * k, ..*s }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn capacitance_per_length_is_scale_free(k in 0.5..2.0f64) {
        let settings = SolverSettings::default();
        let g = plates();
        let base = fieldsolve::solve(&g, &coarse(), &settings).unwrap();
        let big = fieldsolve::solve(&g.scaled(k), &scaled_spec(&coarse(), k), &settings).unwrap();
        let (c0, c1) = (base.capacitance_per_length(0).unwrap(), big.capacitance_per_length(0).unwrap());
        prop_assert!((c1 / c0 - 1.0).abs() < 1e-6, "{c0} vs {c1}");
        // E·length is scale free as well.
        let e0 = base.field_per_volt(0.0, 0.0).unwrap() * 50e-6;
        let e1 = big.field_per_volt(0.0, 0.0).unwrap() * 50e-6 * k;
        prop_assert!((e1 / e0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn potentials_superpose(alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let settings = SolverSettings { tolerance: 1e-12, ..Default::default() };
        let with = |top: f64, bottom: f64| {
            let mut g = plates();
            g.conductors[0].potential = top;
            g.conductors[1].potential = bottom;
            fieldsolve::solve(&g, &coarse(), &settings).unwrap()
        };
        let (t, b, mix) = (with(1.0, 0.0), with(0.0, 1.0), with(alpha, beta));
        let scale = alpha.abs().max(beta.abs()).max(1e-3);
        let worst = mix
            .phi
            .iter()
            .zip(t.phi.iter().zip(&b.phi))
            .map(|(m, (x, y))| (m - alpha * x - beta * y).abs())
            .fold(0.0, f64::max);
        prop_assert!(worst < 1e-7 * scale, "{worst:e}");
    }

    #[test]
    fn homogeneity_ignores_the_drive_voltage(k in 0.01..100.0f64, sigma in 0.2e-6..3e-6f64) {
        let settings = SolverSettings::default();
        let cloud = AtomCloud::new(sigma, 30e-6, 1e-6, 1e6).unwrap();
        let g = plates();
        let m1 = fieldsolve::solve(&g, &coarse(), &settings).unwrap();
        let mk = fieldsolve::solve(&g.with_voltage_scale(k), &coarse(), &settings).unwrap();
        let (e1, ek) = (homogeneity_eta(&m1, &cloud, g.probe).unwrap(), homogeneity_eta(&mk, &cloud, g.probe).unwrap());
        prop_assert!((e1 - ek).abs() <= 1e-6 * e1.max(1e-9), "{e1} vs {ek}");
    }

    #[test]
    fn cached_solves_match_fresh_ones(w in 300e-6..600e-6f64) {
        let settings = SolverSettings::default();
        let g = ChipCrossSection::parallel_plates(w, 50e-6, 5e-3).unwrap();
        let cache = SolveCache::new();
        let first = cache.solve(&g, &coarse(), &settings).unwrap();
        let again = cache.solve(&g, &coarse(), &settings).unwrap();
        let fresh = fieldsolve::solve(&g, &coarse(), &settings).unwrap();
        prop_assert_eq!(cache.len(), 1);
        prop_assert_eq!(&first.phi, &again.phi);
        prop_assert_eq!(&first.phi, &fresh.phi);
        prop_assert_eq!(first.capacitance_per_length(0).unwrap(), fresh.capacitance_per_length(0).unwrap());
    }
}
