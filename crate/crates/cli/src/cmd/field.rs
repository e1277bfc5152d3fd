//! Field solve of the configured cross-section.

use rydcav::beam_trap::cloud_profile;
use rydcav::config::GeometryKind;
use rydcav::exposure::flipchip_plate_length;
use rydcav::fieldsolve::homogeneity_eta;
use rydcav::optimize::CrossSectionModel;

use super::{config_err, create};
use crate::report::Report;
use crate::{Context, Failure};

/// Relative slack on the maximum-principle check.
const MAX_PRINCIPLE_TOL: f64 = 1e-9;

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let geom = cfg.geometry.cross_section().map_err(config_err)?;
    let beam = cfg.beam().map_err(config_err)?;
    let cloud = cloud_profile(&beam, &cfg.species().map_err(config_err)?, cfg.cloud.temperature_k, cfg.cloud.atom_count)?;
    let model = cfg.native_model();
    let (map, c_prime, rel_diff) = model.resolved(&geom)?;
    let report = map.capacitance_report(0)?;
    let (px, pz) = geom.probe;
    let e_per_v = map.field_per_volt(px, pz)?;

    let path = ctx.output("field_map.csv")?;
    map.write_csv(create(&path)?)?;

    let mut r = Report::new("field");
    r.section("geometry")
        .text(
            "kind",
            match cfg.geometry.kind {
                GeometryKind::Planar => "planar",
                GeometryKind::Flipchip => "flipchip",
            },
        )
        .num("probe_x_m", px)
        .num("probe_z_m", pz)
        .int("nodes", (map.nx() * map.nz()) as u64)
        .int("nx", map.nx() as u64)
        .int("nz", map.nz() as u64);
    r.section("solver")
        .int("iterations", map.iterations as u64)
        .num("residual", map.residual)
        .flag("maximum_principle", map.satisfies_maximum_principle(MAX_PRINCIPLE_TOL)?);
    r.section("capacitance")
        .num("C_per_length_F_per_m", c_prime)
        .num("C_energy_F_per_m", report.energy)
        .num("C_charge_F_per_m", report.charge)
        .num("rel_diff", rel_diff);
    r.section("field").num("E_per_V_per_m", e_per_v).num("E_per_V_per_cm", e_per_v / 100.0);
    match cfg.geometry.kind {
        GeometryKind::Planar => {
            let l = cfg.circuit.plate_length_m;
            r.num("plate_length_m", l).num("C0_F", c_prime * l).num("eta", homogeneity_eta(&map, &cloud, geom.probe)?);
        }
        GeometryKind::Flipchip => {
            let d = cfg.geometry.plate_distance_m.ok_or_else(|| Failure::Usage("missing geometry.plate_distance_m".into()))?;
            let l = flipchip_plate_length(d);
            let s = model.flipchip(d, cfg.geometry.plate_width_m, l, Some(&cloud))?;
            r.num("plate_length_m", l).num("C0_F", s.capacitance).opt("eta", s.eta);
        }
    }
    r.file(&path);
    r.emit(ctx.json)?;
    Ok(())
}
