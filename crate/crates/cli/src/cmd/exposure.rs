//! Direct and scattered laser power, and the flip-chip width table.

use rydcav::constants::TWO_PI;
use rydcav::exposure::{self, ChipSurfaces, ExposureBudget};
use rydcav::Error;

use super::{config_err, write_rows};
use crate::report::Report;
use crate::{Context, Failure};

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let beam = cfg.beam().map_err(config_err)?;
    let species = cfg.species().map_err(config_err)?;
    let ex = &cfg.exposure;
    let b = ExposureBudget::evaluate(&beam, &species, ex.chip_width_m, cfg.cloud.atom_count, ex.power_limit_w, ex.surfaces)?;
    let z0 = beam.focus_height();
    let re = exposure::edge_ratio(&beam, ex.power_limit_w, ex.surfaces)?;
    let crit = match exposure::critical_chip_width(&beam, z0, ex.power_limit_w, ex.surfaces) {
        Ok(w) => Some(w),
        Err(Error::NoSafeWidth { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let path = ctx.output("flipchip_table.csv")?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &d in &cfg.sweep.flipchip_d_m {
        let row = exposure::flipchip_row(&beam, d, ex.power_limit_w);
        let row = match row {
            Ok(r) => r,
            Err(Error::NoSafeWidth { .. }) => exposure::FlipChipRow {
                d,
                a: d,
                l: exposure::flipchip_plate_length(d),
                l_ch: exposure::flipchip_chip_width(d),
                l_ch_crit: f64::NAN,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![row.d, row.a, row.l, row.l_ch, row.l_ch_crit]);
        table.push(row);
    }
    write_rows(&path, &["d_m", "a_m", "l_m", "l_ch_m", "l_ch_crit_m"], rows)?;

    let surfaces = match ex.surfaces {
        ChipSurfaces::Single => "single",
        ChipSurfaces::Double => "double",
    };
    let mut r = Report::new("exposure");
    r.section("direct")
        .num("chip_width_m", ex.chip_width_m)
        .text("surfaces", surfaces)
        .num("P_dir_W", b.direct_power)
        .num("P_limit_W", b.power_limit)
        .flag("within_limit", b.within_limit())
        .num("edge_ratio", re)
        .opt("critical_chip_width_m", crit)
        .num("min_plate_distance_m", exposure::min_plate_distance(&beam, ex.power_limit_w, ChipSurfaces::Double)?);
    r.section("scattering")
        .num("Gamma_sc_rad_per_s", b.scattering_rate)
        .num("Gamma_sc_over_2pi_per_s", b.scattering_rate / TWO_PI)
        .num("atom_count", cfg.cloud.atom_count)
        .num("P_sc_W", b.scattered_power);
    r.file(&path);
    r.attach("flipchip_table", serde_json::to_value(&table).expect("rows serialise"));
    r.emit(ctx.json)?;
    Ok(())
}
