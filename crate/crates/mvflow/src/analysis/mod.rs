//! Run-time monitors and post-run audits: per-record diagnostics of a flow
//! trajectory, exponential decay-rate fitting, monotonicity and pinching
//! audits, and the limit-sphere comparison.
//!
//! The central scalar is the umbilicity deficit `f = 1/n^n - K/H^n` with
//! `K = prod lambda_i` and `H = sum lambda_i`: it is zero exactly at
//! umbilic points, positive elsewhere, and its maximum over the surface is
//! the quantity whose decay certifies convergence to a round sphere.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::curvfun::CurvatureClass;
use crate::geometry::{
    mixed_volume, radii_bounds, surface_area, unit_ball_volume, CurvatureData, GeomError,
    GeometryState,
};

/// A per-record drop of the monotone quantity larger than this fraction of
/// its value fails the monotonicity audit.
pub const MONOTONE_DROP_REL: f64 = 1e-6;

/// Minimum number of records inside the decay window for a trustworthy fit.
pub const FIT_MIN_RECORDS: usize = 20;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectory io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// One sampled instant of a flow: the diagnostics the convergence theory
/// talks about, cheap enough to take every few steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub step: u64,
    /// max over nodes of `1/n^n - K/H^n` (zero exactly on a round sphere).
    pub f_max: f64,
    /// min over nodes of `K/H^n`.
    pub min_q1: f64,
    /// min over nodes of `K/F^n`, the quantity that is monotone under the
    /// flow for admissible speeds.
    pub min_q2: f64,
    /// max over nodes of `lambda_max / lambda_min`.
    pub pinch_ratio: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub phi_bar: f64,
    pub phi_max: f64,
    /// max over nodes of `Phi / (h_centered - rho_minus/4)`, a proxy for the
    /// gradient bound's controlling ratio; `h_centered` is the support about
    /// the Steiner point.
    pub z_max: f64,
    /// Inner support radius about the Steiner point.
    pub rho_minus: f64,
    /// Outer support radius about the Steiner point.
    pub rho_plus: f64,
    /// `rho_plus / rho_minus`.
    pub support_ratio: f64,
    /// The pinching bound `((n+2)/sqrt(2)) * pinch_ratio` the support ratio
    /// is compared against.
    pub ratio_bound: f64,
    /// Discrete surface area.
    pub area: f64,
    /// The conserved mixed volume `V_{n-m}` for the flow's global term.
    pub v_conserved: f64,
}

impl MonitorRecord {
    /// Whether the support ratio sits inside its pinching bound (with a
    /// one-ulp-scale indulgence).
    pub fn within_ratio_bound(&self) -> bool {
        self.support_ratio <= self.ratio_bound * (1.0 + 1e-12)
    }
}

/// Takes one record from a consistent set of per-node fields: `f_value` and
/// `phi` are the speed function and its beta-power, `speed` the full motion
/// `phi_bar - phi`, all evaluated on `curv`.
#[allow(clippy::too_many_arguments)]
pub fn measure(
    t: f64,
    step: u64,
    state: &GeometryState,
    curv: &CurvatureData,
    f_value: &[f64],
    phi: &[f64],
    speed: &[f64],
    phi_bar: f64,
    m_index: i64,
) -> Result<MonitorRecord, AnalysisError> {
    let n = curv.n;
    let nf = n as f64;
    let inv_nn = nf.powi(-(n as i32));
    let mut f_max = f64::NEG_INFINITY;
    let mut min_q1 = f64::INFINITY;
    let mut min_q2 = f64::INFINITY;
    let mut speed_min = f64::INFINITY;
    let mut speed_max = f64::NEG_INFINITY;
    let mut phi_max = f64::NEG_INFINITY;
    for node in 0..curv.node_count {
        let lam = curv.lambda_at(node);
        let mut k = 1.0;
        let mut h_sum = 0.0;
        for &l in lam {
            k *= l;
            h_sum += l;
        }
        let q1 = k / h_sum.powi(n as i32);
        let q2 = k / f_value[node].powi(n as i32);
        min_q1 = min_q1.min(q1);
        min_q2 = min_q2.min(q2);
        f_max = f_max.max(inv_nn - q1);
        speed_min = speed_min.min(speed[node]);
        speed_max = speed_max.max(speed[node]);
        phi_max = phi_max.max(phi[node]);
    }
    let rb = radii_bounds(state, curv);
    // Gradient-bound proxy: Phi over the recentered support, kept away from
    // zero by an eps of a quarter inner radius.
    let eps = rb.rho_minus / 4.0;
    let h = state.support();
    let mut z_max = f64::NEG_INFINITY;
    for node in 0..curv.node_count {
        let u = state.normal_components(node);
        let shift: f64 = rb.steiner.iter().zip(&u).map(|(s, ui)| s * ui).sum();
        z_max = z_max.max(phi[node] / (h[node] - shift - eps));
    }
    let v_conserved = mixed_volume(h, curv, m_index)?;
    Ok(MonitorRecord {
        t,
        step,
        f_max,
        min_q1,
        min_q2,
        pinch_ratio: rb.pinch_ratio,
        speed_min,
        speed_max,
        phi_bar,
        phi_max,
        z_max,
        rho_minus: rb.rho_minus,
        rho_plus: rb.rho_plus,
        support_ratio: rb.ratio,
        ratio_bound: rb.bound,
        area: surface_area(curv),
        v_conserved,
    })
}

const TRAJECTORY_HEADER: &str = "t,step,f_max,min_q1,min_q2,pinch_ratio,speed_min,speed_max,\
phi_bar,phi_max,z_max,rho_minus,rho_plus,support_ratio,ratio_bound,area,v_conserved";

/// Writes records as CSV with 17-digit floats (lossless round trip).
pub fn write_trajectory(path: &Path, records: &[MonitorRecord]) -> Result<(), AnalysisError> {
    let mut out = String::with_capacity(records.len() * 340 + 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t,
            r.step,
            r.f_max,
            r.min_q1,
            r.min_q2,
            r.pinch_ratio,
            r.speed_min,
            r.speed_max,
            r.phi_bar,
            r.phi_max,
            r.z_max,
            r.rho_minus,
            r.rho_plus,
            r.support_ratio,
            r.ratio_bound,
            r.area,
            r.v_conserved,
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trajectory CSV written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> Result<Vec<MonitorRecord>, AnalysisError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| AnalysisError::Parse("empty trajectory".into()))?;
    if header != TRAJECTORY_HEADER {
        let got: Vec<&str> = header.split(',').collect();
        let missing: Vec<&str> = TRAJECTORY_HEADER
            .split(',')
            .filter(|c| !got.contains(c))
            .collect();
        let unexpected: Vec<&str> = got
            .iter()
            .copied()
            .filter(|c| !TRAJECTORY_HEADER.split(',').any(|e| e == *c))
            .collect();
        let mut msg = String::from("unexpected trajectory header");
        if !missing.is_empty() {
            let _ = write!(msg, "; missing columns: {}", missing.join(", "));
        }
        if !unexpected.is_empty() {
            let _ = write!(msg, "; unknown columns: {}", unexpected.join(", "));
        }
        if missing.is_empty() && unexpected.is_empty() {
            let _ = write!(msg, "; columns are misordered: {header}");
        }
        return Err(AnalysisError::Parse(msg));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 17 {
            return Err(AnalysisError::Parse(format!(
                "line {}: expected 17 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let f = |k: usize| -> Result<f64, AnalysisError> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| AnalysisError::Parse(format!("line {}: {e}: {:?}", lineno + 1, fields[k])))
        };
        records.push(MonitorRecord {
            t: f(0)?,
            step: fields[1].parse::<u64>().map_err(|e| {
                AnalysisError::Parse(format!("line {}: {e}: {:?}", lineno + 1, fields[1]))
            })?,
            f_max: f(2)?,
            min_q1: f(3)?,
            min_q2: f(4)?,
            pinch_ratio: f(5)?,
            speed_min: f(6)?,
            speed_max: f(7)?,
            phi_bar: f(8)?,
            phi_max: f(9)?,
            z_max: f(10)?,
            rho_minus: f(11)?,
            rho_plus: f(12)?,
            support_ratio: f(13)?,
            ratio_bound: f(14)?,
            area: f(15)?,
            v_conserved: f(16)?,
        });
    }
    Ok(records)
}

/// Result of checking that the class-matched pinching quantity never drops
/// materially between records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityAudit {
    /// Which field was audited: `min_q1` (concave class) or `min_q2`
    /// (convex class).
    pub quantity: String,
    /// Most negative normalized increment `(next - prev) / |prev|` seen.
    pub worst_drop_rel: f64,
    /// Step at which the worst increment started.
    pub worst_at_step: u64,
    pub passes: bool,
}

/// Audits the monotone pinching quantity across consecutive records: the
/// flow keeps `min K/H^n` nondecreasing for concave speed functions and
/// `min K/F^n` for convex ones. Dips up to [`MONOTONE_DROP_REL`] (relative)
/// are discretization noise, anything larger is a violation.
pub fn monotonicity_audit(records: &[MonitorRecord], class: CurvatureClass) -> MonotonicityAudit {
    let (quantity, pick): (&str, fn(&MonitorRecord) -> f64) = match class {
        CurvatureClass::Concave => ("min_q1", |r| r.min_q1),
        CurvatureClass::Convex => ("min_q2", |r| r.min_q2),
    };
    let mut worst = f64::INFINITY;
    let mut at = 0;
    for pair in records.windows(2) {
        let prev = pick(&pair[0]);
        let drop = (pick(&pair[1]) - prev) / prev.abs().max(f64::MIN_POSITIVE);
        if drop < worst {
            worst = drop;
            at = pair[0].step;
        }
    }
    if !worst.is_finite() {
        // Zero or one record: nothing to compare, trivially monotone.
        worst = 0.0;
    }
    MonotonicityAudit {
        quantity: quantity.to_string(),
        worst_drop_rel: worst,
        worst_at_step: at,
        passes: worst >= -MONOTONE_DROP_REL,
    }
}

/// Least-squares fit of `ln f_max` against `t` over the late decay window.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayFit {
    Fit {
        /// Slope of `ln f_max` vs `t`; negative means exponential decay.
        rate: f64,
        intercept: f64,
        r_squared: f64,
        window_len: usize,
    },
    Unavailable {
        reason: String,
    },
}

/// Fits the exponential decay of `f_max`, using only records past the
/// initial transient (`f_max <= 1e-2 * f_max(0)`) and above the convergence
/// floor (`f_max >= 10 * f_tolerance`), where the decay is clean.
pub fn fit_decay(records: &[MonitorRecord], f_tolerance: f64) -> DecayFit {
    let Some(first) = records.first() else {
        return DecayFit::Unavailable {
            reason: "no records".into(),
        };
    };
    let ceiling = 1e-2 * first.f_max;
    let floor = 10.0 * f_tolerance;
    let window: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.f_max > 0.0 && r.f_max <= ceiling && r.f_max >= floor)
        .map(|r| (r.t, r.f_max.ln()))
        .collect();
    if window.len() < FIT_MIN_RECORDS {
        return DecayFit::Unavailable {
            reason: format!(
                "decay window has {} records, need {FIT_MIN_RECORDS}",
                window.len()
            ),
        };
    }
    let len = window.len() as f64;
    let mean_t = window.iter().map(|p| p.0).sum::<f64>() / len;
    let mean_y = window.iter().map(|p| p.1).sum::<f64>() / len;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, y) in &window {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if stt == 0.0 || syy == 0.0 {
        return DecayFit::Unavailable {
            reason: "zero variance in the decay window".into(),
        };
    }
    let rate = sty / stt;
    let r_squared = (sty * sty) / (stt * syy);
    DecayFit::Fit {
        rate,
        intercept: mean_y - rate * mean_t,
        r_squared,
        window_len: window.len(),
    }
}

/// Closed-form radius of the limit sphere and the final body's deviation
/// from it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitSphere {
    pub r_star: f64,
    /// `max(|rho_plus - R*|, |rho_minus - R*|) / R*` of the final body,
    /// measured about its Steiner point.
    pub max_rel_deviation: f64,
}

/// The flow conserves `V_{n-m}`, so the only sphere it can converge to has
/// `omega_{n+1} R^{n-m} = V_{n-m}(0)`. Compares the final body against that
/// radius.
pub fn limit_sphere_check(
    v_initial: f64,
    m_index: i64,
    state: &GeometryState,
    curv: &CurvatureData,
) -> LimitSphere {
    let n = state.n();
    let power = (n as i64 - m_index) as f64;
    let r_star = (v_initial / unit_ball_volume(n + 1)).powf(1.0 / power);
    let rb = radii_bounds(state, curv);
    let dev = (rb.rho_plus - r_star)
        .abs()
        .max((rb.rho_minus - r_star).abs())
        / r_star;
    LimitSphere {
        r_star,
        max_rel_deviation: dev,
    }
}
