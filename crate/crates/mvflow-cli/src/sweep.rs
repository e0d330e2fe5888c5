//! `sweep` subcommand: cartesian product of flow configs, one isolated
//! output directory per run, aggregated into `sweep.csv`.
//!
//! The sweep config is a base flow config plus value lists per axis; an
//! empty (or absent) axis keeps the base value. Single-run failures —
//! invalid combinations, convexity loss at step zero, anything — are
//! recorded in their row and the sweep carries on.

use std::fs;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use mvflow::curvfun::CurvFamily;
use mvflow::flow::{FlowConfig, InitialBodyConfig, Termination};
use serde::Deserialize;

use crate::run::{execute, RunSummary};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    base: FlowConfig,
    #[serde(default)]
    axes: SweepAxes,
}

/// Value lists for the swept parameters. An `eccentricities` entry `e`
/// replaces the initial body with the spheroid of semi-axes `(1, e)`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepAxes {
    #[serde(default)]
    specs: Vec<CurvFamily>,
    #[serde(default)]
    betas: Vec<f64>,
    #[serde(default)]
    m_indices: Vec<i64>,
    #[serde(default)]
    ns: Vec<usize>,
    #[serde(default)]
    eccentricities: Vec<f64>,
}

struct Case {
    index: usize,
    config: FlowConfig,
    spec_label: String,
    eccentricity: Option<f64>,
}

struct Row {
    case_dir: String,
    spec_label: String,
    beta: f64,
    m_index: i64,
    n: usize,
    eccentricity: Option<f64>,
    result: Result<RunSummary, String>,
}

/// Display label for a family that may not even be valid at the case's
/// dimension (invalid combinations still need a row).
fn family_label(family: &CurvFamily) -> String {
    match family {
        CurvFamily::MeanH => "MeanH".to_string(),
        CurvFamily::NormOfA => "NormOfA".to_string(),
        CurvFamily::GammaK { k } => format!("GammaK({k})"),
        CurvFamily::QuotientEml { m, l } => format!("QuotientEml({m},{l})"),
        CurvFamily::PowerMean { r } => format!("PowerMean({r})"),
    }
}

fn termination_label(t: &Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::TimeLimit => "time_limit",
        Termination::MaxSteps => "max_steps",
        Termination::ConvexityLoss { .. } => "convexity_loss",
    }
}

/// Expands the axes into concrete configs, outermost axis first, so row
/// order is the nested-loop order of the axes as listed in the config.
fn expand(sweep: &SweepConfig) -> Vec<Case> {
    fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
        if axis.is_empty() {
            vec![base]
        } else {
            axis.to_vec()
        }
    }
    let specs = or_base(&sweep.axes.specs, sweep.base.spec.clone());
    let betas = or_base(&sweep.axes.betas, sweep.base.beta);
    let m_indices = or_base(&sweep.axes.m_indices, sweep.base.m_index);
    let ns = or_base(&sweep.axes.ns, sweep.base.n);
    let eccentricities: Vec<Option<f64>> = if sweep.axes.eccentricities.is_empty() {
        vec![None]
    } else {
        sweep.axes.eccentricities.iter().copied().map(Some).collect()
    };

    let mut cases = Vec::new();
    for spec in &specs {
        for &beta in &betas {
            for &m_index in &m_indices {
                for &n in &ns {
                    for &ecc in &eccentricities {
                        let mut config = sweep.base.clone();
                        config.spec = spec.clone();
                        config.beta = beta;
                        config.m_index = m_index;
                        config.n = n;
                        if let Some(c) = ecc {
                            config.initial = InitialBodyConfig::Spheroid { a: 1.0, c };
                        }
                        cases.push(Case {
                            index: cases.len(),
                            config,
                            spec_label: family_label(spec),
                            eccentricity: ecc,
                        });
                    }
                }
            }
        }
    }
    cases
}

/// Quotes a CSV field if it contains a separator, quote, or newline.
fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn render_rows(rows: &[Row]) -> String {
    let mut out = String::from(
        "index,dir,spec,beta,m_index,n,eccentricity,status,termination,steps,t_final,\
         drift,fitted_rate,worst_monotone_drop,error\n",
    );
    for (index, row) in rows.iter().enumerate() {
        let ecc = row
            .eccentricity
            .map(|e| format!("{e}"))
            .unwrap_or_default();
        let _ = write!(
            out,
            "{index},{dir},{spec},{beta},{m},{n},{ecc},",
            dir = row.case_dir,
            spec = csv_escape(&row.spec_label),
            beta = row.beta,
            m = row.m_index,
            n = row.n,
        );
        match &row.result {
            Ok(s) => {
                let rate = s
                    .fitted_rate
                    .map(|r| format!("{r:.6e}"))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "ok,{term},{steps},{t:.6e},{drift:.3e},{rate},{drop:.3e},",
                    term = termination_label(&s.termination),
                    steps = s.steps,
                    t = s.t_final,
                    drift = s.conserved_drift,
                    drop = s.monotonicity.worst_drop_rel,
                );
            }
            Err(msg) => {
                let _ = writeln!(out, "error,,,,,,{}", csv_escape(msg));
            }
        }
    }
    out
}

pub fn cmd_sweep(config_path: &Path, out_dir: &Path, workers: usize) -> Result<u8> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read sweep config {}", config_path.display()))?;
    let sweep: SweepConfig = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not a valid sweep config", config_path.display()))?;
    let cases = expand(&sweep);
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;
    log::info!(
        "sweep: {} case(s) across {} worker(s) into {}",
        cases.len(),
        workers.max(1),
        out_dir.display()
    );

    let rows: Mutex<Vec<Option<Row>>> = Mutex::new((0..cases.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cases.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cases.len() {
                    break;
                }
                let case = &cases[i];
                let case_dir = format!("run_{:03}", case.index);
                let result = execute(&case.config, &out_dir.join(&case_dir))
                    .map_err(|e| format!("{e:#}"));
                match &result {
                    Ok(s) => log::info!(
                        "sweep case {i} ({}): {} after {} steps",
                        case.spec_label,
                        termination_label(&s.termination),
                        s.steps
                    ),
                    Err(msg) => log::info!("sweep case {i} ({}): {msg}", case.spec_label),
                }
                rows.lock().expect("a sweep worker panicked")[i] = Some(Row {
                    case_dir,
                    spec_label: case.spec_label.clone(),
                    beta: case.config.beta,
                    m_index: case.config.m_index,
                    n: case.config.n,
                    eccentricity: case.eccentricity,
                    result,
                });
            });
        }
    });

    let rows: Vec<Row> = rows
        .into_inner()
        .expect("a sweep worker panicked")
        .into_iter()
        .map(|r| r.expect("every case index was claimed by exactly one worker"))
        .collect();
    let failures = rows.iter().filter(|r| r.result.is_err()).count();
    fs::write(out_dir.join("sweep.csv"), render_rows(&rows))
        .with_context(|| format!("cannot write {}", out_dir.join("sweep.csv").display()))?;
    if failures > 0 {
        eprintln!(
            "sweep: {failures} of {} case(s) failed; details in sweep.csv",
            rows.len()
        );
    }
    Ok(0)
}
