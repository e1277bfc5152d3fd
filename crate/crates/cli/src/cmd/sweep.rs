//! Geometry sweeps at fixed resonance frequency.

use rydcav::constants::TWO_PI;
use rydcav::optimize::{sweep_flipchip, sweep_planar, SweepTable};

use super::{config_err, create};
use crate::report::Report;
use crate::{Context, Failure};

pub fn run(ctx: &Context, flipchip: bool) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let sc = cfg.sweep_config(ctx.jobs).map_err(config_err)?;
    let model = cfg.native_model();
    let ranges = &cfg.sweep;
    let (table, name) = if flipchip {
        (sweep_flipchip(&model, &ranges.flipchip_d_m, &sc)?, "sweep_flipchip.csv")
    } else {
        (sweep_planar(&model, &ranges.planar_a_m, &ranges.planar_b_m, &sc)?, "sweep_planar.csv")
    };
    let path = ctx.output(name)?;
    table.write_csv(create(&path)?)?;
    let total = table.points.len() + table.failures.len();
    if table.points.is_empty() {
        report_failures(&table);
        return Err(Failure::Numerical(format!("all {total} sweep points failed")));
    }

    let best = table.optimum()?;
    let mut r = Report::new(if flipchip { "sweep-flipchip" } else { "sweep-planar" });
    r.section("sweep")
        .int("points", table.points.len() as u64)
        .int("failed", table.failures.len() as u64)
        .num("target_f_Hz", sc.target_omega / TWO_PI);
    r.section("optimum")
        .num("a_m", best.a)
        .num(if flipchip { "d_m" } else { "b_m" }, best.b)
        .num("g_rad_per_s", best.g)
        .num("g_over_2pi_Hz", best.g / TWO_PI)
        .num("C_F", best.capacitance)
        .num("L_H", best.inductance)
        .opt("s_m", best.s)
        .opt("eta", best.eta)
        .num("E_per_V_per_m", best.field_per_volt)
        .num("resonance_error", best.resonance_error);
    if !flipchip && table.points.len() > 1 {
        match table.lumped_inductance_estimate() {
            Ok(l0) => r.num("L0_estimate_H", l0),
            Err(_) => r.text("L0_estimate_H", "n/a"),
        };
    }
    r.file(&path);
    r.attach("failures", serde_json::to_value(&table.failures).expect("failures serialise"));
    r.emit(ctx.json)?;

    if table.is_complete() {
        Ok(())
    } else {
        report_failures(&table);
        Err(Failure::Partial(format!("{} of {total} sweep points failed", table.failures.len())))
    }
}

fn report_failures(table: &SweepTable) {
    for f in &table.failures {
        eprintln!("failed point ({:e}, {:e}): {}", f.a, f.b, f.error);
    }
}
