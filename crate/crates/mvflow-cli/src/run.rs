//! `run` subcommand: execute one flow and write its artifact set.
//!
//! Output directory layout:
//!
//! ```text
//! out/
//!   trajectory.csv              monitor records, one row per cadence
//!   snapshots/step_NNNNNNNN.csv support function + curvature per node
//!   summary.json                termination, conservation, fits, audits
//!   manifest.json               config hash, version, layout, wall time
//! ```
//!
//! Everything except `manifest.json` is bitwise reproducible: rerunning the
//! same config gives identical bytes. The manifest carries the wall clock.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use mvflow::analysis::{
    fit_decay, limit_sphere_check, monotonicity_audit, write_trajectory, DecayFit, LimitSphere,
    MonotonicityAudit,
};
use mvflow::flow::{run, FlowConfig, Termination};
use mvflow::geometry::{radii_bounds, write_snapshot, RadiiBounds};
use serde::Serialize;

use crate::manifest::{config_hash, RunManifest};

/// Everything `summary.json` records about one finished run. Wall-clock
/// time is deliberately absent so that two runs of the same config produce
/// byte-identical summaries; timing lives in the manifest.
#[derive(Serialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub exit_code: i32,
    pub steps: u64,
    pub t_final: f64,
    pub records: usize,
    /// Conserved mixed volume at the first and last recorded instants.
    pub v_initial: f64,
    pub v_final: f64,
    /// Worst relative excursion of the conserved mixed volume over the run.
    pub conserved_drift: f64,
    /// Slope of the late-time `ln f_max` fit, when one is available.
    pub fitted_rate: Option<f64>,
    pub decay_fit: DecayFit,
    /// Audit of the class-matched pinching quantity (`min_q1` for concave
    /// speeds, `min_q2` for convex ones).
    pub monotonicity: MonotonicityAudit,
    /// Radius of the only sphere the conservation law allows as a limit,
    /// and the final body's relative deviation from it.
    pub limit_sphere: LimitSphere,
    /// Inner/outer support radii of the final body about its Steiner point.
    pub final_bounds: RadiiBounds,
}

/// Reads and parses a JSON flow config, keeping serde's line/column
/// information in the error message.
pub(crate) fn parse_config(path: &Path) -> Result<FlowConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: FlowConfig = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not a valid flow config", path.display()))?;
    Ok(config)
}

/// Validates `config`, runs it, and writes the full artifact set into
/// `out_dir`. Returns the summary so callers (the sweep) can tabulate it.
pub(crate) fn execute(config: &FlowConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let class = config.build_spec()?.class();
    let snapshots_dir = out_dir.join("snapshots");
    fs::create_dir_all(&snapshots_dir)
        .with_context(|| format!("cannot create output dir {}", snapshots_dir.display()))?;

    let started = Instant::now();
    let outcome = run(config)?;
    let mut outputs = Vec::new();

    write_trajectory(&out_dir.join("trajectory.csv"), &outcome.records)?;
    outputs.push("trajectory.csv".to_string());

    for (step, _t, state) in &outcome.snapshots {
        let rel = format!("snapshots/step_{step:08}.csv");
        let curv = state.curvatures()?;
        write_snapshot(&out_dir.join(&rel), state, &curv)?;
        outputs.push(rel);
    }

    let final_curv = outcome.geometry.curvatures()?;
    let decay_fit = fit_decay(&outcome.records, config.f_tolerance);
    let fitted_rate = match &decay_fit {
        DecayFit::Fit { rate, .. } => Some(*rate),
        DecayFit::Unavailable { .. } => None,
    };
    let summary = RunSummary {
        termination: outcome.termination.clone(),
        exit_code: outcome.exit_code(),
        steps: outcome.step,
        t_final: outcome.t,
        records: outcome.records.len(),
        v_initial: outcome.v_initial,
        v_final: outcome.v_final,
        conserved_drift: outcome.conserved_drift(),
        fitted_rate,
        decay_fit,
        monotonicity: monotonicity_audit(&outcome.records, class),
        limit_sphere: limit_sphere_check(
            outcome.v_initial,
            config.m_index,
            &outcome.geometry,
            &final_curv,
        ),
        final_bounds: radii_bounds(&outcome.geometry, &final_curv),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".to_string());

    outputs.push("manifest.json".to_string());
    let manifest = RunManifest {
        config_hash: config_hash(config)?,
        artifact_version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        outputs,
        wall_seconds: started.elapsed().as_secs_f64(),
        termination: outcome.termination.clone(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    log::info!(
        "run finished: {:?} after {} steps, artifacts in {}",
        summary.termination,
        summary.steps,
        out_dir.display()
    );
    Ok(summary)
}

pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<u8> {
    let config = parse_config(config_path)?;
    let summary = execute(&config, out_dir)?;
    Ok(summary.exit_code as u8)
}

/// Pretty-printed JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
