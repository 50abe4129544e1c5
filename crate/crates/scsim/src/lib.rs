//! Config-driven experiments for `scsim-core`: JSON configs, the check
//! catalog, a deterministic replicate runner and JSON / CSV reports.

pub mod catalog;
pub mod checks;
pub mod config;
pub mod report;
pub mod runner;

pub use catalog::{render_catalog, CheckName, CATALOG};
pub use config::{ConfigError, ExperimentConfig, Model};
pub use report::{Metric, Report, Row, Rule, Status};
pub use runner::{run, RunOptions};

use std::io;

use scsim_core::solve_cumulant;

/// Writes `V_t f` on the solver grid as CSV: `t` then one column per site.
/// Uses the first target; the horizon defaults to the target time.
pub fn write_cumulant_csv<W: io::Write>(model: &Model, w: W) -> anyhow::Result<()> {
    let target = model.target(None).ok_or_else(|| anyhow::anyhow!("config has no targets"))?;
    let horizon = model.solver.horizon.unwrap_or(target.t);
    let sol = solve_cumulant(&model.mech, &model.motion, &target.f, horizon, model.solver.step)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(model.sites.labels().iter().cloned());
    out.write_record(&header)?;
    for (t, v) in sol.times().iter().zip(sol.values()) {
        let mut rec = vec![t.to_string()];
        rec.extend(v.iter().map(|x| x.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
