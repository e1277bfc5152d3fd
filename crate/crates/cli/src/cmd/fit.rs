//! Reflection-trace fitting and synthetic traces.

use std::fs::File;
use std::path::Path;

use rydcav::constants::TWO_PI;
use rydcav::resfit::{background_correct, fit, synth_trace, S11Trace};

use super::{config_err, create};
use crate::report::Report;
use crate::{Context, Failure};

pub fn run(ctx: &Context, trace: &Path) -> Result<(), Failure> {
    let file = File::open(trace).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", trace.display())))?;
    let t = S11Trace::read_csv(file).map_err(|e| Failure::Usage(format!("{}: {e}", trace.display())))?;
    let res = fit(&t, &ctx.config.fit)?;
    let p = &res.params;
    let e = &res.errors;

    let json_path = ctx.output("fit_result.json")?;
    serde_json::to_writer_pretty(create(&json_path)?, &res).map_err(|e| Failure::Usage(e.to_string()))?;
    let params_path = ctx.output("fit_params.csv")?;
    let rows = [
        ("f0_Hz", p.omega0 / TWO_PI, e.omega0 / TWO_PI),
        ("kappa_int_rad_per_s", p.kappa_int, e.kappa_int),
        ("kappa_ext_rad_per_s", p.kappa_ext, e.kappa_ext),
        ("theta_rad", p.theta, e.theta),
        ("a0", p.a0, e.a0),
        ("a1_s", p.a1, e.a1),
        ("a2_s2", p.a2, e.a2),
        ("phi0_rad", p.phi0, e.phi0),
        ("phi1_s", p.phi1, e.phi1),
    ];
    {
        let mut w = csv::Writer::from_writer(create(&params_path)?);
        let err = |e: csv::Error| Failure::Usage(format!("{}: {e}", params_path.display()));
        w.write_record(["parameter", "value", "stderr"]).map_err(err)?;
        for (name, v, s) in rows {
            w.write_record([name.to_string(), format!("{v:e}"), format!("{s:e}")]).map_err(err)?;
        }
        w.flush()?;
    }
    let corrected_path = ctx.output("trace_corrected.csv")?;
    background_correct(&t, &res)?.write_csv(create(&corrected_path)?)?;

    let mut r = Report::new("fit");
    r.section("resonance")
        .num("f0_Hz", p.omega0 / TWO_PI)
        .num("f0_stderr_Hz", e.omega0 / TWO_PI)
        .num("kappa_int_rad_per_s", p.kappa_int)
        .num("kappa_int_stderr", e.kappa_int)
        .num("kappa_ext_rad_per_s", p.kappa_ext)
        .num("kappa_ext_stderr", e.kappa_ext)
        .num("Q_int", res.q_int())
        .num("Q_ext", res.q_ext())
        .num("theta_rad", p.theta)
        .num("theta_stderr", e.theta);
    r.section("background")
        .num("a0", p.a0)
        .num("a1_s", p.a1)
        .num("a2_s2", p.a2)
        .num("phi0_rad", p.phi0)
        .num("phi1_s", p.phi1)
        .num("omega_ref_rad_per_s", p.omega_ref);
    r.section("quality")
        .num("residual_norm", res.residual_norm)
        .num("sigma_hat", res.sigma_hat)
        .int("samples", res.samples as u64);
    r.file(&json_path).file(&params_path).file(&corrected_path);
    r.emit(ctx.json)?;
    Ok(())
}

pub fn synth(ctx: &Context, output: Option<&Path>) -> Result<(), Failure> {
    let s = &ctx.config.synth;
    let p = s.params().map_err(config_err)?;
    let (lo, hi) = s.span().map_err(config_err)?;
    let t = synth_trace(&p, lo, hi, s.points, s.sigma, ctx.seed)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => ctx.output("synth_trace.csv")?,
    };
    t.write_csv(create(&path)?)?;
    let mut r = Report::new("synth");
    r.section("trace")
        .num("f0_Hz", p.omega0 / TWO_PI)
        .num("Q_int", p.q_int())
        .num("Q_ext", p.q_ext())
        .int("points", s.points as u64)
        .num("sigma", s.sigma)
        .int("seed", ctx.seed);
    r.file(&path);
    r.emit(ctx.json)?;
    Ok(())
}
