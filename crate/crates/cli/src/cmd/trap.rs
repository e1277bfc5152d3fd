//! Trap characteristics and 1D potential cuts through the focus.

use rydcav::beam_trap::{self, harmonic_regime, HarmonicRegime};
use rydcav::constants::{BOLTZMANN, TWO_PI};

use super::{config_err, write_rows};
use crate::report::Report;
use crate::{Context, Failure};

const PROFILE_POINTS: usize = 401;

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let beam = ctx.config.beam().map_err(config_err)?;
    let species = ctx.config.species().map_err(config_err)?;
    let cloud_cfg = &ctx.config.cloud;
    let u0 = beam_trap::center_potential(&beam, &species)?;
    let depth = beam_trap::trap_depth_kelvin(&beam, &species)?;
    let (wr, wy) = beam_trap::oscillation_frequencies(&beam, &species)?;
    let cloud = beam_trap::cloud_profile(&beam, &species, cloud_cfg.temperature_k, cloud_cfg.atom_count)?;

    let z0 = beam.focus_height();
    let lr = beam.rayleigh_length();
    let zpath = ctx.output("trap_profile_z.csv")?;
    let ypath = ctx.output("trap_profile_y.csv")?;
    let u = |x, y, z| beam_trap::trap_potential(&beam, &species, (x, y, z));
    let mut zrows = Vec::with_capacity(PROFILE_POINTS);
    for i in 0..PROFILE_POINTS {
        let z = 2.0 * z0 * i as f64 / (PROFILE_POINTS - 1) as f64;
        let v = u(0.0, 0.0, z)?;
        zrows.push(vec![z, v, v / BOLTZMANN]);
    }
    write_rows(&zpath, &["z_m", "U_J", "U_over_kB_K"], zrows)?;
    let mut yrows = Vec::with_capacity(PROFILE_POINTS);
    for i in 0..PROFILE_POINTS {
        let y = -3.0 * lr + 6.0 * lr * i as f64 / (PROFILE_POINTS - 1) as f64;
        let v = u(0.0, y, z0)?;
        yrows.push(vec![y, v, v / BOLTZMANN]);
    }
    write_rows(&ypath, &["y_m", "U_J", "U_over_kB_K"], yrows)?;

    let regime = match harmonic_regime(cloud_cfg.temperature_k, depth) {
        HarmonicRegime::Harmonic => "harmonic",
        HarmonicRegime::Marginal => "marginal",
        HarmonicRegime::Invalid => "invalid",
    };
    let mut r = Report::new("trap");
    r.section("beam").num("rayleigh_length_m", lr).num("waist_m", beam.waist()).num("focus_height_m", z0);
    r.section("trap")
        .num("depth_J", -u0)
        .num("depth_K", depth)
        .num("omega_r_rad_per_s", wr)
        .num("f_r_Hz", wr / TWO_PI)
        .num("omega_y_rad_per_s", wy)
        .num("f_y_Hz", wy / TWO_PI);
    r.section("cloud")
        .num("temperature_K", cloud.temperature)
        .num("sigma_r_m", cloud.sigma_r)
        .num("sigma_y_m", cloud.sigma_y)
        .num("d_Rb_m", cloud.diameter())
        .num("l_Rb_m", cloud.length())
        .text("regime", regime);
    r.file(&zpath).file(&ypath);
    r.emit(ctx.json)?;
    Ok(())
}
