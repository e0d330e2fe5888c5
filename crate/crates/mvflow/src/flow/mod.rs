//! The flow engine: evolves the support function of a strictly convex
//! hypersurface by `dh/dt = phi_bar - F^beta`, where `F` is a normalized
//! degree-one curvature function and `phi_bar` is the global term that
//! makes the speed orthogonal to the variation of a chosen mixed volume,
//! so that `V_{n-m}` is conserved along the flow.
//!
//! Discretely, `phi_bar = sum(Phi E_{m+1} w) / sum(E_{m+1} w)` over nodes,
//! which zeroes `sum(speed * E_{m+1} * w)` to rounding error; the conserved
//! quantity then drifts only through the discretization error of the
//! variational identity, which shrinks with the grid.
//!
//! Time stepping is an explicit two-stage midpoint scheme with a CFL-limited
//! step; losing strict convexity is a classified termination, not a panic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{measure, AnalysisError, MonitorRecord};
use crate::curvfun::{
    esym_value, eval_value_grad, CurvError, CurvFamily, CurvatureSpec, MAX_DIM,
};
use crate::geometry::{
    ellipsoid_grid, mixed_volume, perturbed_sphere_grid, perturbed_sphere_profile, sphere_grid,
    sphere_profile, spheroid_profile, GeomError, GeometryState,
};

/// Number of consecutive monitor records with `f_max` below tolerance
/// required to declare convergence.
pub const CONVERGENCE_STREAK: u32 = 10;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow config: {0}")]
    Config(String),
    #[error(transparent)]
    Curv(#[from] CurvError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn default_intervals() -> usize {
    256
}
fn default_grid_intervals() -> usize {
    64
}
fn default_radius() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    1.0
}
fn default_m_index() -> i64 {
    -1
}
fn default_cfl() -> f64 {
    0.25
}
fn default_f_tolerance() -> f64 {
    1e-8
}
fn default_cadence() -> u64 {
    50
}
fn default_max_steps() -> u64 {
    1_000_000
}

/// Which spatial discretization carries the support function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Rotationally symmetric profile `h(theta)`, any dimension.
    Axisym {
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
    /// Full latitude-longitude grid on `S^2` (dimension `n = 2` only).
    Grid2d {
        #[serde(default = "default_grid_intervals")]
        intervals_theta: usize,
        #[serde(default = "default_grid_intervals")]
        intervals_phi: usize,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Axisym {
            intervals: default_intervals(),
        }
    }
}

/// Initial convex body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialBodyConfig {
    Sphere {
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// `x_1^2/a^2 + ... + x_n^2/a^2 + x_{n+1}^2/c^2 = 1`.
    Spheroid { a: f64, c: f64 },
    /// General triaxial ellipsoid; requires the `grid2d` backend.
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Sphere plus a (possibly azimuthal) spherical-harmonic bump; `m > 0`
    /// requires the `grid2d` backend.
    PerturbedSphere {
        #[serde(default = "default_radius")]
        radius: f64,
        amplitude: f64,
        l: usize,
        #[serde(default)]
        m: usize,
    },
}

impl Default for InitialBodyConfig {
    fn default() -> Self {
        InitialBodyConfig::Sphere {
            radius: default_radius(),
        }
    }
}

/// Full description of one flow run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Hypersurface dimension (the body lives in `R^{n+1}`).
    pub n: usize,
    /// Curvature function family for the speed `F`.
    pub spec: CurvFamily,
    /// Speed exponent; the admissibility hypothesis is `beta >= 1`.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Index of the conserved mixed volume: `m = -1` conserves enclosed
    /// volume, `m = 0` surface area, ..., up to `m = n - 1`.
    #[serde(default = "default_m_index")]
    pub m_index: i64,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub initial: InitialBodyConfig,
    /// Fraction of the diffusive stability limit used for the time step.
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Optional time horizon; omit to run until convergence or `max_steps`.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Convergence threshold on `f_max = max(1/n^n - K/H^n)`.
    #[serde(default = "default_f_tolerance")]
    pub f_tolerance: f64,
    /// Steps between monitor records.
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    /// Steps between stored geometry snapshots. `None` (the default) keeps
    /// only the initial and final states; long runs would otherwise
    /// accumulate thousands of surface copies.
    #[serde(default)]
    pub snapshot_cadence: Option<u64>,
    /// Seed for any randomized verification run alongside the flow; the flow
    /// itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl FlowConfig {
    /// Builds the validated curvature spec for this run.
    pub fn build_spec(&self) -> Result<CurvatureSpec, FlowError> {
        Ok(CurvatureSpec::new(self.spec.clone(), self.n)?)
    }

    /// Checks every static requirement; the returned messages are meant to
    /// be user-facing.
    pub fn validate(&self) -> Result<(), FlowError> {
        self.build_spec()?;
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(CurvError::BetaBelowOne(self.beta).into());
        }
        let n = self.n as i64;
        if self.m_index < -1 || self.m_index > n - 1 {
            return Err(FlowError::Config(format!(
                "mixed-volume index m = {} must satisfy -1 <= m <= n - 1 = {}",
                self.m_index,
                n - 1
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(FlowError::Config(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.f_tolerance > 0.0) || !self.f_tolerance.is_finite() {
            return Err(FlowError::Config(format!(
                "f_tolerance = {} must be positive and finite",
                self.f_tolerance
            )));
        }
        if self.cadence == 0 {
            return Err(FlowError::Config("cadence must be at least 1".into()));
        }
        if self.snapshot_cadence == Some(0) {
            return Err(FlowError::Config(
                "snapshot_cadence must be at least 1 when set".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(FlowError::Config("max_steps must be at least 1".into()));
        }
        if let Some(te) = self.t_end {
            if !(te > 0.0) || !te.is_finite() {
                return Err(FlowError::Config(format!(
                    "t_end = {te} must be positive and finite"
                )));
            }
        }
        if matches!(self.backend, BackendConfig::Grid2d { .. }) && self.n != 2 {
            return Err(FlowError::Config(format!(
                "the grid2d backend is two-dimensional, got n = {}",
                self.n
            )));
        }
        let axis_ok = |v: f64| v > 0.0 && v.is_finite();
        match &self.initial {
            InitialBodyConfig::Sphere { radius } => {
                if !axis_ok(*radius) {
                    return Err(FlowError::Config(format!(
                        "sphere radius = {radius} must be positive and finite"
                    )));
                }
            }
            InitialBodyConfig::Spheroid { a, c } => {
                if !axis_ok(*a) || !axis_ok(*c) {
                    return Err(FlowError::Config(format!(
                        "spheroid semi-axes (a, c) = ({a}, {c}) must be positive and finite"
                    )));
                }
            }
            InitialBodyConfig::Ellipsoid { a, b, c } => {
                if !axis_ok(*a) || !axis_ok(*b) || !axis_ok(*c) {
                    return Err(FlowError::Config(format!(
                        "ellipsoid semi-axes ({a}, {b}, {c}) must be positive and finite"
                    )));
                }
                if !matches!(self.backend, BackendConfig::Grid2d { .. }) {
                    return Err(FlowError::Config(
                        "a triaxial ellipsoid needs the grid2d backend; use a spheroid \
                         for the axisymmetric one"
                            .into(),
                    ));
                }
            }
            InitialBodyConfig::PerturbedSphere { radius, m, .. } => {
                if !axis_ok(*radius) {
                    return Err(FlowError::Config(format!(
                        "sphere radius = {radius} must be positive and finite"
                    )));
                }
                if *m > 0 && !matches!(self.backend, BackendConfig::Grid2d { .. }) {
                    return Err(FlowError::Config(
                        "an azimuthal perturbation (m > 0) needs the grid2d backend".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Constructs the initial geometry on the configured backend.
    pub fn build_geometry(&self) -> Result<GeometryState, FlowError> {
        self.validate()?;
        let state = match (&self.backend, &self.initial) {
            (BackendConfig::Axisym { intervals }, InitialBodyConfig::Sphere { radius }) => {
                GeometryState::Axisym(sphere_profile(self.n, *intervals, *radius))
            }
            (BackendConfig::Axisym { intervals }, InitialBodyConfig::Spheroid { a, c }) => {
                GeometryState::Axisym(spheroid_profile(self.n, *intervals, *a, *c))
            }
            (
                BackendConfig::Axisym { intervals },
                InitialBodyConfig::PerturbedSphere {
                    radius,
                    amplitude,
                    l,
                    ..
                },
            ) => GeometryState::Axisym(perturbed_sphere_profile(
                self.n, *intervals, *radius, *amplitude, *l,
            )?),
            (BackendConfig::Axisym { .. }, InitialBodyConfig::Ellipsoid { .. }) => {
                unreachable!("validate() rejects ellipsoid on axisym")
            }
            (
                BackendConfig::Grid2d {
                    intervals_theta,
                    intervals_phi,
                },
                initial,
            ) => {
                let (it, ip) = (*intervals_theta, *intervals_phi);
                let grid = match initial {
                    InitialBodyConfig::Sphere { radius } => sphere_grid(it, ip, *radius),
                    InitialBodyConfig::Spheroid { a, c } => ellipsoid_grid(it, ip, [*a, *a, *c]),
                    InitialBodyConfig::Ellipsoid { a, b, c } => {
                        ellipsoid_grid(it, ip, [*a, *b, *c])
                    }
                    InitialBodyConfig::PerturbedSphere {
                        radius,
                        amplitude,
                        l,
                        m,
                    } => perturbed_sphere_grid(it, ip, *radius, *amplitude, *l, *m)?,
                };
                GeometryState::Grid2D(grid)
            }
        };
        Ok(state)
    }
}

/// Everything one speed evaluation produces: curvature data, the per-node
/// speed function `F`, its power `Phi = F^beta`, the orthogonality weight
/// `E_{m+1}(lambda)`, the global term, the resulting motion, and the
/// diffusivity that limits the explicit time step.
pub struct SpeedBundle {
    pub curv: crate::geometry::CurvatureData,
    /// `F` per node.
    pub f: Vec<f64>,
    /// `Phi = F^beta` per node.
    pub phi: Vec<f64>,
    /// `E_{m+1}(lambda)` per node.
    pub e_next: Vec<f64>,
    /// `phi_bar - Phi` per node.
    pub speed: Vec<f64>,
    pub phi_bar: f64,
    /// Per-node parabolic coefficient `beta F^{beta-1} sum_i F_i lambda_i^2`,
    /// the scale of the second-order term in the linearized speed.
    pub nu: Vec<f64>,
}

/// Evaluates curvatures, speed and global term on the current state.
pub fn evaluate_speed(
    spec: &CurvatureSpec,
    beta: f64,
    m_index: i64,
    state: &GeometryState,
) -> Result<SpeedBundle, FlowError> {
    let curv = state.curvatures()?;
    let n = curv.n;
    let count = curv.node_count;
    debug_assert!(m_index >= -1 && m_index < n as i64);
    let e_order = (m_index + 1) as usize;
    let mut f = vec![0.0; count];
    let mut phi = vec![0.0; count];
    let mut e_next = vec![0.0; count];
    let mut nu = vec![0.0; count];
    let mut grad = [0.0; MAX_DIM];
    for node in 0..count {
        let lam = curv.lambda_at(node);
        let value = eval_value_grad(spec, lam, &mut grad[..n])?;
        // f^{beta-1} with the common exponents kept exact: on a unit sphere
        // every factor stays 1.0 to the last bit, which makes the sphere an
        // exact fixed point of the discrete flow.
        let fpow = if beta == 1.0 {
            1.0
        } else if beta == 2.0 {
            value
        } else {
            value.powf(beta - 1.0)
        };
        let mut s_nu = 0.0;
        for i in 0..n {
            s_nu += grad[i] * lam[i] * lam[i];
        }
        f[node] = value;
        phi[node] = fpow * value;
        nu[node] = beta * fpow * s_nu;
        e_next[node] = esym_value(lam, e_order);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for node in 0..count {
        let ew = e_next[node] * curv.weight[node];
        num += phi[node] * ew;
        den += ew;
    }
    let phi_bar = num / den;
    let speed = phi.iter().map(|p| phi_bar - p).collect();
    Ok(SpeedBundle {
        curv,
        f,
        phi,
        e_next,
        speed,
        phi_bar,
        nu,
    })
}

/// Largest explicit step the diffusive terms allow, times `cfl_safety`.
/// Uses each node's effective stencil spacing, so pole refinement on the
/// 2-d grid is priced in.
pub fn stable_dt(state: &GeometryState, bundle: &SpeedBundle, cfl_safety: f64) -> f64 {
    let mut dt = f64::INFINITY;
    for node in 0..bundle.curv.node_count {
        let s = state.spacing(node);
        dt = dt.min(s * s / bundle.nu[node]);
    }
    cfl_safety * dt
}

/// One explicit midpoint step of size `dt`: `h* = h + dt s(h)`, then
/// `h <- h + dt s((h + h*)/2)`, recomputing the global term at both stages.
/// If the midpoint state has lost convexity, the original state is restored
/// before the error is returned.
pub fn step_once(
    state: &mut GeometryState,
    spec: &CurvatureSpec,
    beta: f64,
    m_index: i64,
    dt: f64,
) -> Result<(), FlowError> {
    let b1 = evaluate_speed(spec, beta, m_index, state)?;
    let h0 = state.support().to_vec();
    {
        let h = state.support_mut();
        for i in 0..h.len() {
            h[i] = h0[i] + dt * b1.speed[i];
        }
        for i in 0..h.len() {
            h[i] = (h0[i] + h[i]) * 0.5;
        }
    }
    let b2 = match evaluate_speed(spec, beta, m_index, state) {
        Ok(b) => b,
        Err(e) => {
            state.support_mut().copy_from_slice(&h0);
            return Err(e);
        }
    };
    let h = state.support_mut();
    for i in 0..h.len() {
        h[i] = h0[i] + dt * b2.speed[i];
    }
    Ok(())
}

/// Why a run stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// `f_max` stayed below tolerance for [`CONVERGENCE_STREAK`] records.
    Converged,
    /// Reached the configured `t_end`.
    TimeLimit,
    /// Used up `max_steps`.
    MaxSteps,
    /// A principal radius fell through the positivity floor; `step`/`t`
    /// locate the failed step, `node`/`radius` the offending point. The
    /// outcome keeps the last strictly convex state.
    ConvexityLoss {
        step: u64,
        t: f64,
        node: usize,
        radius: f64,
    },
}

/// Result of a full run: final (always strictly convex) state, the monitor
/// trail, and the conserved mixed volume at both ends.
pub struct FlowOutcome {
    pub termination: Termination,
    pub geometry: GeometryState,
    pub t: f64,
    pub step: u64,
    pub records: Vec<MonitorRecord>,
    /// `(step, t, state)` triples: always the initial and final states, plus
    /// every `snapshot_cadence` steps when the config sets one.
    pub snapshots: Vec<(u64, f64, GeometryState)>,
    pub v_initial: f64,
    pub v_final: f64,
}

impl FlowOutcome {
    /// Worst relative excursion of the conserved mixed volume over the run.
    pub fn conserved_drift(&self) -> f64 {
        let v0 = self.v_initial;
        self.records
            .iter()
            .map(|r| (r.v_conserved - v0).abs() / v0.abs())
            .fold(0.0, f64::max)
    }

    /// Process exit code for the CLI: 0 converged, 2 convexity lost,
    /// 3 stopped on a step or time budget.
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::Converged => 0,
            Termination::ConvexityLoss { .. } => 2,
            Termination::TimeLimit | Termination::MaxSteps => 3,
        }
    }
}

/// Runs a flow to termination, recording monitors every `cadence` steps and
/// at the final state. Deterministic: the same config produces bitwise
/// identical trajectories.
pub fn run(config: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    config.validate()?;
    let spec = config.build_spec()?;
    let mut state = config.build_geometry()?;
    let count = state.node_count();
    let mut records: Vec<MonitorRecord> = Vec::new();
    let mut snapshots: Vec<(u64, f64, GeometryState)> = Vec::new();
    let mut prev_h = state.support().to_vec();
    let mut prev_t = 0.0;
    let mut prev_step = 0u64;
    let mut t = 0.0;
    let mut step: u64 = 0;
    let mut v_initial = f64::NAN;
    let mut streak = 0u32;

    let termination = loop {
        let bundle = match evaluate_speed(&spec, config.beta, config.m_index, &state) {
            Ok(b) => b,
            Err(FlowError::Geom(GeomError::ConvexityLoss { node, radius, .. })) => {
                if step == 0 {
                    return Err(FlowError::Config(format!(
                        "initial body is not strictly convex: node {node} has principal \
                         radius {radius:e}"
                    )));
                }
                let (lost_t, lost_step) = (t, step);
                state.support_mut().copy_from_slice(&prev_h);
                t = prev_t;
                step = prev_step;
                break Termination::ConvexityLoss {
                    step: lost_step,
                    t: lost_t,
                    node,
                    radius,
                };
            }
            Err(e) => return Err(e),
        };
        if step == 0 {
            v_initial = mixed_volume(state.support(), &bundle.curv, config.m_index)?;
        }
        let want_snapshot =
            step == 0 || config.snapshot_cadence.is_some_and(|sc| step.is_multiple_of(sc));
        if want_snapshot && snapshots.last().map(|s| s.0) != Some(step) {
            snapshots.push((step, t, state.clone()));
        }
        if step.is_multiple_of(config.cadence) {
            let rec = measure(
                t,
                step,
                &state,
                &bundle.curv,
                &bundle.f,
                &bundle.phi,
                &bundle.speed,
                bundle.phi_bar,
                config.m_index,
            )?;
            log::debug!(
                "step {step} t {t:.6e} f_max {:.3e} pinch {:.6} v {:.12e}",
                rec.f_max,
                rec.pinch_ratio,
                rec.v_conserved
            );
            let below = rec.f_max < config.f_tolerance;
            records.push(rec);
            streak = if below { streak + 1 } else { 0 };
            if streak >= CONVERGENCE_STREAK {
                break Termination::Converged;
            }
        }
        if let Some(te) = config.t_end {
            if te - t <= te * 1e-12 {
                break Termination::TimeLimit;
            }
        }
        if step >= config.max_steps {
            break Termination::MaxSteps;
        }
        let mut dt = stable_dt(&state, &bundle, config.cfl_safety);
        if let Some(te) = config.t_end {
            dt = dt.min(te - t);
        }
        prev_h.copy_from_slice(state.support());
        prev_t = t;
        prev_step = step;
        {
            let h = state.support_mut();
            for i in 0..count {
                h[i] = prev_h[i] + dt * bundle.speed[i];
            }
            for i in 0..count {
                h[i] = (prev_h[i] + h[i]) * 0.5;
            }
        }
        match evaluate_speed(&spec, config.beta, config.m_index, &state) {
            Ok(b2) => {
                let h = state.support_mut();
                for i in 0..count {
                    h[i] = prev_h[i] + dt * b2.speed[i];
                }
            }
            Err(FlowError::Geom(GeomError::ConvexityLoss { node, radius, .. })) => {
                state.support_mut().copy_from_slice(&prev_h);
                break Termination::ConvexityLoss {
                    step,
                    t,
                    node,
                    radius,
                };
            }
            Err(e) => return Err(e),
        }
        t += dt;
        step += 1;
    };

    if records.last().map(|r| r.step) != Some(step) {
        let bundle = evaluate_speed(&spec, config.beta, config.m_index, &state)?;
        records.push(measure(
            t,
            step,
            &state,
            &bundle.curv,
            &bundle.f,
            &bundle.phi,
            &bundle.speed,
            bundle.phi_bar,
            config.m_index,
        )?);
    }
    if snapshots.last().map(|s| s.0) != Some(step) {
        snapshots.push((step, t, state.clone()));
    }
    let v_final = records.last().map(|r| r.v_conserved).unwrap_or(v_initial);
    log::info!(
        "flow stopped after {step} steps at t = {t:.6e}: {termination:?}; \
         conserved volume {v_initial:.12e} -> {v_final:.12e}"
    );
    Ok(FlowOutcome {
        termination,
        geometry: state,
        t,
        step,
        records,
        snapshots,
        v_initial,
        v_final,
    })
}

/// Outcome of checking the variational identity
/// `d/dt integral(E_m dmu) = c_m integral(speed E_{m+1} dmu)`
/// (`c_m = m + 1` for `m >= 0`, and `n + 1` for the `m = -1` support
/// integral) against a centered difference of the discrete functional along
/// the flow direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdentityCheck {
    /// `m = n`: the integrand is a topological invariant, its variation
    /// vanishes identically and there is no `E_{n+1}` to test against.
    SkippedTopological { m_index: i64 },
    Residual {
        m_index: i64,
        /// Centered difference of the discrete functional.
        lhs: f64,
        /// `c_m * sum(speed * E_{m+1} * w)`.
        rhs: f64,
        difference: f64,
        /// `difference` over the one-sided mass `c_m * sum(|speed| E_{m+1} w)`;
        /// falls back to 0 or infinity when that mass vanishes.
        relative: f64,
    },
}

/// Probes the variational identity at the given state, moving along the
/// flow speed for the same index `m` by `±delta` with
/// `delta = stable_dt / 4`.
pub fn integral_identity_check(
    state: &GeometryState,
    spec: &CurvatureSpec,
    beta: f64,
    m_index: i64,
) -> Result<IdentityCheck, FlowError> {
    let n = state.n() as i64;
    if m_index == n {
        return Ok(IdentityCheck::SkippedTopological { m_index });
    }
    if m_index < -1 || m_index > n {
        return Err(FlowError::Config(format!(
            "identity index m = {m_index} must satisfy -1 <= m <= n = {n}"
        )));
    }
    let bundle = evaluate_speed(spec, beta, m_index, state)?;
    let delta = 0.25 * stable_dt(state, &bundle, default_cfl());
    let functional = |s: &GeometryState| -> Result<f64, FlowError> {
        let curv = s.curvatures()?;
        let mut acc = 0.0;
        if m_index == -1 {
            let h = s.support();
            for i in 0..curv.node_count {
                acc += h[i] * curv.weight[i];
            }
        } else {
            let m = m_index as usize;
            for i in 0..curv.node_count {
                acc += esym_value(curv.lambda_at(i), m) * curv.weight[i];
            }
        }
        Ok(acc)
    };
    let mut plus = state.clone();
    let mut minus = state.clone();
    {
        let hp = plus.support_mut();
        for i in 0..hp.len() {
            hp[i] += delta * bundle.speed[i];
        }
        let hm = minus.support_mut();
        for i in 0..hm.len() {
            hm[i] -= delta * bundle.speed[i];
        }
    }
    let lhs = (functional(&plus)? - functional(&minus)?) / (2.0 * delta);
    let c_m = if m_index == -1 {
        (n + 1) as f64
    } else {
        (m_index + 1) as f64
    };
    let mut rhs = 0.0;
    let mut mass = 0.0;
    for node in 0..bundle.curv.node_count {
        let ew = bundle.e_next[node] * bundle.curv.weight[node];
        rhs += bundle.speed[node] * ew;
        mass += (bundle.speed[node] * ew).abs();
    }
    rhs *= c_m;
    mass *= c_m;
    let difference = (lhs - rhs).abs();
    let relative = if mass > 0.0 {
        difference / mass
    } else if difference == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(IdentityCheck::Residual {
        m_index,
        lhs,
        rhs,
        difference,
        relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvfun::default_registry;
    use crate::geometry::{sphere_area, surface_integral};
    use approx::assert_relative_eq;

    fn mean_h_spec(n: usize) -> CurvatureSpec {
        CurvatureSpec::new(CurvFamily::MeanH, n).unwrap()
    }

    #[test]
    fn unit_sphere_is_a_bitwise_fixed_point() {
        for n in [2usize, 3] {
            let state = GeometryState::Axisym(sphere_profile(n, 64, 1.0));
            for spec in default_registry(n) {
                for beta in [1.0, 2.0] {
                    let b = evaluate_speed(&spec, beta, -1, &state).unwrap();
                    assert_eq!(b.phi_bar, 1.0, "{} beta={beta}", spec.name());
                    assert!(
                        b.speed.iter().all(|&s| s == 0.0),
                        "{} beta={beta}",
                        spec.name()
                    );
                }
            }
        }
        // And on the 2-d grid.
        let grid = GeometryState::Grid2D(sphere_grid(32, 32, 1.0));
        let b = evaluate_speed(&mean_h_spec(2), 2.0, 0, &grid).unwrap();
        assert!(b.speed.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sphere_support_never_moves_across_steps() {
        let mut state = GeometryState::Axisym(sphere_profile(2, 64, 1.0));
        let spec = CurvatureSpec::new(CurvFamily::QuotientEml { m: 2, l: 0 }, 2).unwrap();
        let bundle = evaluate_speed(&spec, 1.5, 0, &state).unwrap();
        let dt = stable_dt(&state, &bundle, 0.25);
        assert!(dt > 0.0 && dt.is_finite());
        let before = state.support().to_vec();
        for _ in 0..100 {
            step_once(&mut state, &spec, 1.5, 0, dt).unwrap();
        }
        for (a, b) in before.iter().zip(state.support()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn global_term_is_orthogonal_to_the_conserved_weight() {
        let state = GeometryState::Axisym(spheroid_profile(3, 96, 1.0, 1.4));
        let spec = mean_h_spec(3);
        for m in -1..3i64 {
            let b = evaluate_speed(&spec, 1.5, m, &state).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..b.curv.node_count {
                let ew = b.e_next[i] * b.curv.weight[i];
                num += b.speed[i] * ew;
                den += (b.speed[i] * ew).abs();
            }
            assert!(den > 0.0);
            assert!(
                num.abs() <= 1e-13 * den,
                "m={m}: residual {:e} vs mass {:e}",
                num,
                den
            );
        }
    }

    #[test]
    fn stable_dt_scales_with_the_expected_radius_power() {
        // On a ball of radius k the diffusivity scales like k^{-(beta+1)},
        // so the admissible step grows like k^{beta+1}.
        let spec = mean_h_spec(2);
        let k = 1.7;
        for beta in [1.0, 1.5, 2.0] {
            let s1 = GeometryState::Axisym(sphere_profile(2, 64, 1.0));
            let sk = GeometryState::Axisym(sphere_profile(2, 64, k));
            let b1 = evaluate_speed(&spec, beta, -1, &s1).unwrap();
            let bk = evaluate_speed(&spec, beta, -1, &sk).unwrap();
            let ratio = stable_dt(&sk, &bk, 0.25) / stable_dt(&s1, &b1, 0.25);
            assert_relative_eq!(ratio, k.powf(beta + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn midpoint_step_has_third_order_local_error() {
        let spec = mean_h_spec(2);
        let base = GeometryState::Axisym(spheroid_profile(2, 64, 1.0, 1.3));
        let b = evaluate_speed(&spec, 1.0, -1, &base).unwrap();
        let dt0 = stable_dt(&base, &b, 0.25);
        let one_minus_two = |dt: f64| -> f64 {
            let mut big = base.clone();
            step_once(&mut big, &spec, 1.0, -1, dt).unwrap();
            let mut small = base.clone();
            step_once(&mut small, &spec, 1.0, -1, dt / 2.0).unwrap();
            step_once(&mut small, &spec, 1.0, -1, dt / 2.0).unwrap();
            big.support()
                .iter()
                .zip(small.support())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = one_minus_two(dt0);
        let e2 = one_minus_two(dt0 / 2.0);
        let order = (e1 / e2).log2();
        assert!(
            (2.6..=3.4).contains(&order),
            "order {order}, e1 {e1:e}, e2 {e2:e}"
        );
    }

    #[test]
    fn flow_commutes_with_translation() {
        // Shifting the body by v adds v·u to the support function and leaves
        // curvatures unchanged; the discrete flow must track that.
        let n = 2;
        let intervals = 128;
        let v = 0.1;
        let base = spheroid_profile(n, intervals, 1.0, 1.3);
        let shifted_h: Vec<f64> = (0..=intervals)
            .map(|j| {
                let theta = j as f64 * std::f64::consts::PI / intervals as f64;
                base.support()[j] + v * theta.cos()
            })
            .collect();
        let shifted = crate::geometry::AxisymProfile::new(n, shifted_h).unwrap();
        let mut a = GeometryState::Axisym(base);
        let mut b = GeometryState::Axisym(shifted);
        let spec = mean_h_spec(n);
        let bundle = evaluate_speed(&spec, 1.0, -1, &a).unwrap();
        let dt = 0.8 * stable_dt(&a, &bundle, 0.25);
        for _ in 0..400 {
            step_once(&mut a, &spec, 1.0, -1, dt).unwrap();
            step_once(&mut b, &spec, 1.0, -1, dt).unwrap();
        }
        let mut worst = 0.0_f64;
        for j in 0..=intervals {
            let theta = j as f64 * std::f64::consts::PI / intervals as f64;
            let expect = a.support()[j] + v * theta.cos();
            worst = worst.max((b.support()[j] - expect).abs());
        }
        assert!(worst < 1e-6, "translation error {worst:e}");
    }

    #[test]
    fn identity_residual_vanishes_on_the_sphere() {
        let state = GeometryState::Axisym(sphere_profile(2, 64, 1.0));
        let spec = mean_h_spec(2);
        match integral_identity_check(&state, &spec, 1.0, 0).unwrap() {
            IdentityCheck::Residual { relative, .. } => assert_eq!(relative, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_residual_is_small_on_spheroids() {
        for (n, m) in [(2usize, 0i64), (2, -1), (3, 1)] {
            let state = GeometryState::Axisym(spheroid_profile(n, 128, 1.0, 1.5));
            let spec = mean_h_spec(n);
            match integral_identity_check(&state, &spec, 1.0, m).unwrap() {
                IdentityCheck::Residual { relative, .. } => {
                    assert!(relative < 1e-2, "n={n} m={m}: relative {relative:e}");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn identity_check_skips_the_topological_index() {
        let state = GeometryState::Axisym(sphere_profile(3, 32, 1.0));
        let spec = mean_h_spec(3);
        assert!(matches!(
            integral_identity_check(&state, &spec, 1.0, 3).unwrap(),
            IdentityCheck::SkippedTopological { m_index: 3 }
        ));
    }

    #[test]
    fn two_dimensional_flow_preserves_axisymmetry() {
        let mut state = GeometryState::Grid2D(ellipsoid_grid(32, 32, [1.0, 1.0, 1.25]));
        let spec = mean_h_spec(2);
        for _ in 0..200 {
            let b = evaluate_speed(&spec, 1.0, 0, &state).unwrap();
            let dt = 0.9 * stable_dt(&state, &b, 0.25);
            step_once(&mut state, &spec, 1.0, 0, dt).unwrap();
        }
        let GeometryState::Grid2D(grid) = &state else {
            unreachable!()
        };
        let n_phi = 32;
        let h = grid.support();
        for ring in 0..31 {
            let row = &h[1 + ring * n_phi..1 + (ring + 1) * n_phi];
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo <= 1e-12, "ring {ring} spread {:e}", hi - lo);
        }
    }

    #[test]
    fn run_converges_on_a_perturbed_sphere() {
        let config = FlowConfig {
            n: 2,
            spec: CurvFamily::MeanH,
            beta: 1.0,
            m_index: -1,
            backend: BackendConfig::Axisym { intervals: 64 },
            initial: InitialBodyConfig::PerturbedSphere {
                radius: 1.0,
                amplitude: 1e-3,
                l: 2,
                m: 0,
            },
            cfl_safety: 0.25,
            t_end: None,
            max_steps: 400_000,
            f_tolerance: 1e-10,
            cadence: 50,
            snapshot_cadence: None,
            seed: 0,
        };
        let out = run(&config).unwrap();
        assert_eq!(out.termination, Termination::Converged);
        assert!(out.records.len() >= CONVERGENCE_STREAK as usize);
        assert!(out.records.last().unwrap().f_max < 1e-10);
        assert!(out.conserved_drift() < 1e-6, "drift {:e}", out.conserved_drift());
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn run_stops_on_step_and_time_budgets() {
        let mut config = FlowConfig {
            n: 2,
            spec: CurvFamily::MeanH,
            beta: 1.0,
            m_index: -1,
            backend: BackendConfig::Axisym { intervals: 32 },
            initial: InitialBodyConfig::Spheroid { a: 1.0, c: 1.3 },
            cfl_safety: 0.25,
            t_end: None,
            max_steps: 17,
            f_tolerance: 1e-13,
            cadence: 5,
            snapshot_cadence: None,
            seed: 0,
        };
        let out = run(&config).unwrap();
        assert_eq!(out.termination, Termination::MaxSteps);
        assert_eq!(out.step, 17);
        assert_eq!(out.records.last().unwrap().step, 17);
        assert_eq!(out.exit_code(), 3);

        config.max_steps = 1_000_000;
        config.t_end = Some(1e-3);
        let out = run(&config).unwrap();
        assert_eq!(out.termination, Termination::TimeLimit);
        assert_relative_eq!(out.t, 1e-3, max_relative = 1e-11);
        assert_eq!(out.exit_code(), 3);
    }

    #[test]
    fn snapshots_cover_the_endpoints_and_the_requested_cadence() {
        let mut config = FlowConfig {
            n: 2,
            spec: CurvFamily::MeanH,
            beta: 1.0,
            m_index: -1,
            backend: BackendConfig::Axisym { intervals: 32 },
            initial: InitialBodyConfig::Spheroid { a: 1.0, c: 1.3 },
            cfl_safety: 0.25,
            t_end: None,
            max_steps: 35,
            f_tolerance: 1e-13,
            cadence: 50,
            snapshot_cadence: Some(10),
            seed: 0,
        };
        let out = run(&config).unwrap();
        let steps: Vec<u64> = out.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(steps, vec![0, 10, 20, 30, 35]);
        assert_eq!(
            out.snapshots.last().unwrap().2.support(),
            out.geometry.support()
        );

        config.snapshot_cadence = None;
        let out = run(&config).unwrap();
        let steps: Vec<u64> = out.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(steps, vec![0, 35]);

        config.snapshot_cadence = Some(0);
        assert!(config.validate().is_err());
    }

    #[test]
    fn oversized_manual_step_is_caught_and_the_state_restored() {
        // A step far beyond the stability limit drives the midpoint state
        // out of the convex cone; the error must carry the offending node
        // and the original state must come back bit for bit.
        let mut state = GeometryState::Axisym(spheroid_profile(2, 32, 1.0, 2.0));
        let spec = mean_h_spec(2);
        let before = state.support().to_vec();
        let err = step_once(&mut state, &spec, 1.0, -1, 50.0).unwrap_err();
        match err {
            FlowError::Geom(GeomError::ConvexityLoss { node, .. }) => {
                assert!(node < state.node_count());
            }
            other => panic!("expected convexity loss, got {other}"),
        }
        for (a, b) in before.iter().zip(state.support()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn oversized_cfl_saturates_instead_of_corrupting_the_state() {
        // cfl_safety = 1 sits beyond the explicit stability limit, but the
        // step size self-scales with the inflating diffusivity, so the run
        // settles into a bounded oscillation and exhausts its step budget
        // with a still-convex state; nothing blows up and nothing lies about
        // convergence.
        let config = FlowConfig {
            n: 2,
            spec: CurvFamily::MeanH,
            beta: 2.0,
            m_index: -1,
            backend: BackendConfig::Axisym { intervals: 32 },
            initial: InitialBodyConfig::Spheroid { a: 1.0, c: 2.5 },
            cfl_safety: 1.0,
            t_end: None,
            max_steps: 5_000,
            f_tolerance: 1e-13,
            cadence: 50,
            snapshot_cadence: None,
            seed: 0,
        };
        let out = run(&config).unwrap();
        assert_eq!(out.termination, Termination::MaxSteps);
        assert!(out.geometry.curvatures().is_ok());
        let last = out.records.last().unwrap();
        assert!(last.f_max > 1e-13, "saturated run must not claim roundness");
        assert!(last.pinch_ratio < 2.0, "oscillation stays bounded");
    }

    #[test]
    fn runs_are_deterministic() {
        let config = FlowConfig {
            n: 2,
            spec: CurvFamily::NormOfA,
            beta: 1.5,
            m_index: 0,
            backend: BackendConfig::Axisym { intervals: 48 },
            initial: InitialBodyConfig::Spheroid { a: 1.0, c: 1.4 },
            cfl_safety: 0.25,
            t_end: Some(0.05),
            max_steps: 1_000_000,
            f_tolerance: 1e-13,
            cadence: 25,
            snapshot_cadence: None,
            seed: 0,
        };
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.records, b.records);
        for (x, y) in a.geometry.support().iter().zip(b.geometry.support()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn invalid_configs_are_rejected_with_reasons() {
        let base = FlowConfig {
            n: 2,
            spec: CurvFamily::MeanH,
            beta: 1.0,
            m_index: -1,
            backend: BackendConfig::default(),
            initial: InitialBodyConfig::default(),
            cfl_safety: 0.25,
            t_end: None,
            max_steps: 100,
            f_tolerance: 1e-8,
            cadence: 50,
            snapshot_cadence: None,
            seed: 0,
        };
        let mut c = base.clone();
        c.beta = 0.5;
        let msg = format!("{}", c.validate().unwrap_err());
        assert!(msg.contains("beta >= 1"), "{msg}");

        let mut c = base.clone();
        c.m_index = 2;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.m_index = -2;
        assert!(c.validate().is_err());

        let mut c = base.clone();
        c.cfl_safety = 0.0;
        assert!(c.validate().is_err());

        let mut c = base.clone();
        c.backend = BackendConfig::Grid2d {
            intervals_theta: 32,
            intervals_phi: 32,
        };
        c.n = 2;
        assert!(c.validate().is_ok());
        c.n = 3;
        assert!(c.validate().is_err());

        let mut c = base.clone();
        c.initial = InitialBodyConfig::Ellipsoid {
            a: 1.0,
            b: 1.1,
            c: 1.2,
        };
        assert!(c.validate().is_err());
        c.backend = BackendConfig::Grid2d {
            intervals_theta: 32,
            intervals_phi: 32,
        };
        assert!(c.validate().is_ok());

        let mut c = base.clone();
        c.initial = InitialBodyConfig::PerturbedSphere {
            radius: 1.0,
            amplitude: 1e-3,
            l: 3,
            m: 2,
        };
        assert!(c.validate().is_err());

        let mut c = base;
        c.t_end = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trips_with_defaults() {
        let text = r#"{
            "n": 3,
            "spec": {"family": "quotient_eml", "m": 2, "l": 0},
            "beta": 1.5,
            "m_index": 1,
            "initial": {"kind": "spheroid", "a": 1.0, "c": 1.6}
        }"#;
        let config: FlowConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.n, 3);
        assert_eq!(config.beta, 1.5);
        assert_eq!(config.m_index, 1);
        assert_eq!(config.cfl_safety, 0.25);
        assert_eq!(config.f_tolerance, 1e-8);
        assert_eq!(config.cadence, 50);
        assert_eq!(
            config.backend,
            BackendConfig::Axisym { intervals: 256 }
        );
        assert!(config.validate().is_ok());
        let echo = serde_json::to_string(&config).unwrap();
        let back: FlowConfig = serde_json::from_str(&echo).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn speed_bundle_matches_direct_surface_integrals() {
        // phi_bar equals the ratio of surface integrals computed
        // independently.
        let state = GeometryState::Axisym(spheroid_profile(3, 64, 1.0, 1.4));
        let spec = mean_h_spec(3);
        let b = evaluate_speed(&spec, 2.0, 1, &state).unwrap();
        let num_field: Vec<f64> = (0..b.curv.node_count)
            .map(|i| b.phi[i] * b.e_next[i])
            .collect();
        let num = surface_integral(&b.curv, &num_field);
        let den = surface_integral(&b.curv, &b.e_next);
        assert_relative_eq!(b.phi_bar, num / den, max_relative = 1e-14);
        // Sanity: the weights integrate to the spheroid's area scale.
        let area = surface_integral(&b.curv, &vec![1.0; b.curv.node_count]);
        assert!(area > 0.5 * sphere_area(3));
    }
}
