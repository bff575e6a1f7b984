//! Experiment configuration, orchestration and reporting.

pub mod config;
pub mod plot;
pub mod result;
pub mod runs;

use std::path::{Path, PathBuf};

pub use config::{config_reference, ExperimentConfig, ExperimentKind};
pub use result::{ExperimentResult, Metric, Plot, Point, Series, SeriesStyle, Timing, Uncertainty};
pub use runs::{
    run, run_continuity_sweep, run_delta_decay, run_dims, run_gap_test, run_harnack_scan,
    run_oracle_compare, run_sample, RunOutput,
};

use crate::error::Result;

/// Writes `<kind>.json`, one CSV per table and per plot, and SVGs when
/// `plots` is set. Returns the written paths.
pub fn write_outputs(dir: &Path, out: &RunOutput, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let kind = out.result.kind.name();
    let mut written = Vec::new();
    let json = dir.join(format!("{kind}.json"));
    out.result.save(&json)?;
    written.push(json);
    for (name, table) in &out.tables {
        let p = dir.join(format!("{kind}_{name}.csv"));
        table.save(&p)?;
        written.push(p);
    }
    for plot in &out.result.plots {
        let p = dir.join(format!("{}.csv", plot.name));
        std::fs::write(&p, plot.to_csv())?;
        written.push(p);
    }
    if plots {
        for (name, svg) in plot::render_all(&out.result) {
            let p = dir.join(name);
            std::fs::write(&p, svg)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Re-renders the plots of a saved result next to it.
pub fn render_saved(result_json: &Path) -> Result<Vec<PathBuf>> {
    let r = ExperimentResult::load(result_json)?;
    let dir = result_json.parent().unwrap_or(Path::new("."));
    let mut written = Vec::new();
    for (name, svg) in plot::render_all(&r) {
        let p = dir.join(name);
        std::fs::write(&p, svg)?;
        written.push(p);
    }
    Ok(written)
}
