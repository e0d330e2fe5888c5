//! `plot` subcommand: four SVG line charts from a trajectory CSV — the
//! umbilicity deficit on a log axis, the monotone pinching quantities, the
//! conserved-volume drift, and the curvature pinch ratio.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mvflow::analysis::{read_trajectory, MonitorRecord};

use crate::svg::{line_chart, Series, PALETTE};

fn pick(
    records: &[MonitorRecord],
    label: &str,
    color: &'static str,
    f: impl Fn(&MonitorRecord) -> f64,
) -> Series {
    Series {
        label: label.to_string(),
        points: records.iter().map(|r| (r.t, f(r))).collect(),
        color,
    }
}

pub fn cmd_plot(trajectory: &Path, out_dir: &Path) -> Result<u8> {
    let records = read_trajectory(trajectory)
        .with_context(|| format!("cannot read trajectory {}", trajectory.display()))?;
    if records.is_empty() {
        bail!(
            "trajectory {} has a header but no records; nothing to plot",
            trajectory.display()
        );
    }
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;

    // Log chart of the umbilicity deficit: only positive values have a
    // logarithm, and an exactly round body sits at zero for the whole run.
    let log_f = Series {
        label: "log10 f_max".to_string(),
        points: records
            .iter()
            .filter(|r| r.f_max > 0.0)
            .map(|r| (r.t, r.f_max.log10()))
            .collect(),
        color: PALETTE[0],
    };
    let v0 = records[0].v_conserved;
    let charts: [(&str, String); 4] = [
        (
            "log_f_max.svg",
            line_chart(
                "umbilicity deficit f_max (log scale)",
                "t",
                "log10 f_max",
                &[log_f],
            ),
        ),
        (
            "min_q.svg",
            line_chart(
                "pinching quantities",
                "t",
                "min over nodes",
                &[
                    pick(&records, "min K/H^n", PALETTE[0], |r| r.min_q1),
                    pick(&records, "min K/F^n", PALETTE[1], |r| r.min_q2),
                ],
            ),
        ),
        (
            "v_drift.svg",
            line_chart(
                "conserved mixed-volume drift",
                "t",
                "(V - V(0)) / V(0)",
                &[pick(&records, "drift", PALETTE[2], |r| {
                    (r.v_conserved - v0) / v0.abs()
                })],
            ),
        ),
        (
            "pinch_ratio.svg",
            line_chart(
                "curvature pinch ratio",
                "t",
                "max lambda_max / lambda_min",
                &[pick(&records, "pinch", PALETTE[3], |r| r.pinch_ratio)],
            ),
        ),
    ];
    for (name, svg) in &charts {
        let path = out_dir.join(name);
        fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
    }
    log::info!(
        "plotted {} records into {} (4 charts)",
        records.len(),
        out_dir.display()
    );
    Ok(0)
}
