//! Discrete convex bodies parametrized by their support function on the
//! unit sphere, with principal radii, quadrature, and mixed volumes.
//!
//! Two backends share one interface:
//!
//! * [`AxisymProfile`]: rotationally symmetric bodies in any dimension,
//!   stored as `h(theta)` on a uniform grid over `[0, pi]`;
//! * [`SphereGrid2D`]: general surfaces in `R^3` on a latitude/longitude
//!   grid with single shared pole values.
//!
//! Curvature comes from the radii form `r = Hess h + h g` of the support
//! function: its eigenvalues are the principal radii `R_i = 1/lambda_i`.
//! Interior derivatives use fourth-order centered stencils written in
//! difference form, so constants are annihilated exactly and a round sphere
//! is an exact fixed point of everything downstream.
//!
//! Surface measure weights are trapezoidal in `theta` with the
//! Euler-Maclaurin end correction at the rotation poles: for `n = 2` the
//! correction gives each pole the positive weight `|S^1| dtheta^2 / 12`;
//! for `n >= 3` the correction term vanishes identically and the poles
//! carry no measure, mirroring the continuum where the axis has measure
//! zero. The resulting rule integrates smooth axisymmetric integrands to
//! fourth order or better.

mod axisym;
mod bodies;
mod snapshot;
mod sphere2d;

pub use axisym::{principal_radii_axisym, AxisymProfile};
pub use bodies::{
    ellipsoid_grid, perturbed_sphere_grid, perturbed_sphere_profile, sphere_grid, sphere_profile,
    spheroid_profile, SpheroidOracle,
};
pub use snapshot::{read_snapshot, write_snapshot};
pub use sphere2d::SphereGrid2D;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvfun::{binomial, esym_value, CurvError, LambdaVector};

/// Principal radii below this fraction of `max h` classify as convexity
/// loss rather than being clamped; the flow terminates with the offending
/// node recorded.
pub const RADII_FLOOR_REL: f64 = 1e-10;

/// Minimum interval count for any grid direction.
pub const MIN_INTERVALS: usize = 8;

/// Minimum interval count a resample target may request.
pub const MIN_RESAMPLE_INTERVALS: usize = 16;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("convexity lost at node {node}: principal radius {radius:e} below floor {floor:e}")]
    ConvexityLoss { node: usize, radius: f64, floor: f64 },
    #[error("support must be positive and finite, got {value} at node {node}")]
    BadSupport { node: usize, value: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("mixed volume index m = {m} out of range for n = {n} (need -1 <= m <= n)")]
    IndexOutOfRange { m: i64, n: usize },
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Curv(#[from] CurvError),
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot parse: {0}")]
    Parse(String),
}

/// Gamma function at half-integer arguments, exactly: `gamma_half(t)`
/// returns `Gamma(t/2)` via factorials and the Legendre duplication value
/// `Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)`.
pub(crate) fn gamma_half(two_x: u32) -> f64 {
    assert!(two_x >= 1, "gamma argument must be positive");
    if two_x.is_multiple_of(2) {
        let mut acc = 1.0_f64;
        for k in 2..(two_x / 2) {
            acc *= k as f64;
        }
        acc
    } else {
        let m = (two_x - 1) / 2;
        let mut acc = std::f64::consts::PI.sqrt();
        // (2m)! / (4^m m!) = prod_{k=1..m} (2k - 1) / 2
        for k in 1..=m {
            acc *= (2 * k - 1) as f64 / 2.0;
        }
        acc
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32 + 2)
}

/// Surface area of the unit sphere `S^k` embedded in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf((k as f64 + 1.0) / 2.0) / gamma_half(k as u32 + 1)
}

/// Curvature snapshot of one node: principal radii, sorted principal
/// curvatures, and the node's share of surface measure. The weight vanishes
/// only at the rotation poles for `n >= 3`, where the axis carries no
/// measure.
#[derive(Clone, Debug)]
pub struct NodeCurvature {
    pub radii: Vec<f64>,
    pub lambda: LambdaVector,
    pub weight: f64,
}

/// Curvature of every node in structure-of-arrays layout, the working
/// currency of the flow and the monitors. `lambda` holds `n` ascending
/// entries per node; `weight` is the full surface-measure weight
/// `prod_i R_i * sphere_weight`.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub n: usize,
    pub node_count: usize,
    pub radii: Vec<f64>,
    pub lambda: Vec<f64>,
    pub weight: Vec<f64>,
    pub sphere_weight: Vec<f64>,
}

impl CurvatureData {
    pub fn lambda_at(&self, node: usize) -> &[f64] {
        &self.lambda[node * self.n..(node + 1) * self.n]
    }

    pub fn radii_at(&self, node: usize) -> &[f64] {
        &self.radii[node * self.n..(node + 1) * self.n]
    }

    pub fn node(&self, node: usize) -> NodeCurvature {
        NodeCurvature {
            radii: self.radii_at(node).to_vec(),
            lambda: LambdaVector::new(self.lambda_at(node).to_vec())
                .expect("stored lambda entries are validated at construction"),
            weight: self.weight[node],
        }
    }

    /// Maximum over nodes of `lambda_max / lambda_min`.
    pub fn pinch_ratio(&self) -> f64 {
        let mut worst = 1.0_f64;
        for i in 0..self.node_count {
            let l = self.lambda_at(i);
            worst = worst.max(l[self.n - 1] / l[0]);
        }
        worst
    }
}

/// Which discrete backend a body lives on.
#[derive(Clone, Debug)]
pub enum GeometryState {
    Axisym(AxisymProfile),
    Grid2D(SphereGrid2D),
}

impl GeometryState {
    /// Hypersurface dimension n (the body lives in `R^{n+1}`).
    pub fn n(&self) -> usize {
        match self {
            GeometryState::Axisym(p) => p.n(),
            GeometryState::Grid2D(_) => 2,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            GeometryState::Axisym(p) => p.support().len(),
            GeometryState::Grid2D(g) => g.node_count(),
        }
    }

    pub fn support(&self) -> &[f64] {
        match self {
            GeometryState::Axisym(p) => p.support(),
            GeometryState::Grid2D(g) => g.support(),
        }
    }

    pub fn support_mut(&mut self) -> &mut [f64] {
        match self {
            GeometryState::Axisym(p) => p.support_mut(),
            GeometryState::Grid2D(g) => g.support_mut(),
        }
    }

    /// Principal radii, curvatures, and quadrature weights at every node.
    pub fn curvatures(&self) -> Result<CurvatureData, GeomError> {
        match self {
            GeometryState::Axisym(p) => p.curvatures(),
            GeometryState::Grid2D(g) => g.curvatures(),
        }
    }

    /// Effective grid spacing at a node, for time-step stability limits.
    /// On the 2D grid the azimuthal spacing shrinks like `sin(theta)` toward
    /// the poles and dominates the constraint there.
    pub fn spacing(&self, node: usize) -> f64 {
        match self {
            GeometryState::Axisym(p) => p.dtheta(),
            GeometryState::Grid2D(g) => g.spacing(node),
        }
    }

    /// Components of the outward unit normal at a node that are needed for
    /// the Steiner point. Axisymmetric bodies only track the axial
    /// component; the 2D grid tracks all three.
    pub fn normal_components(&self, node: usize) -> Vec<f64> {
        match self {
            GeometryState::Axisym(p) => vec![p.theta(node).cos()],
            GeometryState::Grid2D(g) => g.normal(node).to_vec(),
        }
    }

    /// Interpolates the body onto a finer or coarser grid of the same
    /// backend kind with cubic accuracy, preserving pole symmetry.
    pub fn resample(&self, intervals_theta: usize, intervals_phi: usize) -> Result<Self, GeomError> {
        match self {
            GeometryState::Axisym(p) => Ok(GeometryState::Axisym(p.resample(intervals_theta)?)),
            GeometryState::Grid2D(g) => {
                Ok(GeometryState::Grid2D(g.resample(intervals_theta, intervals_phi)?))
            }
        }
    }
}

/// Integral of a per-node field against the discrete surface measure. The
/// summation order is fixed (node index order), so results are bitwise
/// reproducible.
pub fn surface_integral(curv: &CurvatureData, field: &[f64]) -> f64 {
    debug_assert_eq!(field.len(), curv.node_count);
    let mut acc = 0.0;
    for i in 0..curv.node_count {
        acc += field[i] * curv.weight[i];
    }
    acc
}

/// Total discrete surface area, `integral of 1 dmu`.
pub fn surface_area(curv: &CurvatureData) -> f64 {
    let mut acc = 0.0;
    for &w in &curv.weight {
        acc += w;
    }
    acc
}

/// Mixed volume `V_{n-m}` of the body:
///
/// * `m = -1` gives the enclosed volume `(n+1)^{-1} integral h dmu`;
/// * `m >= 0` gives `[(n+1) binom(n,m)]^{-1} integral E_m(lambda) dmu`.
///
/// On a ball of radius `R` every `V_{n-m}` equals `omega_{n+1} R^{n-m}`.
pub fn mixed_volume(support: &[f64], curv: &CurvatureData, m: i64) -> Result<f64, GeomError> {
    let n = curv.n;
    if m < -1 || m > n as i64 {
        return Err(GeomError::IndexOutOfRange { m, n });
    }
    let mut acc = 0.0;
    if m == -1 {
        debug_assert_eq!(support.len(), curv.node_count);
        for i in 0..curv.node_count {
            acc += support[i] * curv.weight[i];
        }
        Ok(acc / (n as f64 + 1.0))
    } else {
        let m = m as usize;
        for i in 0..curv.node_count {
            acc += esym_value(curv.lambda_at(i), m) * curv.weight[i];
        }
        Ok(acc / ((n as f64 + 1.0) * binomial(n, m)))
    }
}

/// All mixed volumes `V_{n-m}` for `m = -1..=n`, cheapest computed together.
pub fn mixed_volumes_all(support: &[f64], curv: &CurvatureData) -> Vec<f64> {
    let n = curv.n;
    let mut out = vec![0.0; n + 2];
    for i in 0..curv.node_count {
        let w = curv.weight[i];
        out[0] += support[i] * w;
        let l = curv.lambda_at(i);
        for m in 0..=n {
            out[m + 1] += esym_value(l, m) * w;
        }
    }
    out[0] /= n as f64 + 1.0;
    for m in 0..=n {
        out[m + 1] /= (n as f64 + 1.0) * binomial(n, m);
    }
    out
}

/// Inner and outer support radii about the Steiner point, plus the pinching
/// comparison `rho_plus / rho_minus <= ((n+2)/sqrt(2)) * pinch_ratio` the
/// convergence estimates predict for pinched bodies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiiBounds {
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Steiner point components (axial only for axisymmetric bodies).
    pub steiner: Vec<f64>,
    pub ratio: f64,
    pub pinch_ratio: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Computes the Steiner point, recenters the support function on it, and
/// reports the extreme support radii.
///
/// Each Steiner component is normalized by the discrete second moment of
/// the corresponding normal component rather than the continuum constant
/// `omega_{n+1}`; the two agree to quadrature accuracy and the discrete
/// choice makes the output exactly invariant under translations
/// `h -> h + <v, u>`.
pub fn radii_bounds(state: &GeometryState, curv: &CurvatureData) -> RadiiBounds {
    let h = state.support();
    let count = curv.node_count;
    let comps = state.normal_components(0).len();
    let mut steiner = vec![0.0; comps];
    for c in 0..comps {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..count {
            let u = state.normal_components(i)[c];
            let w = curv.sphere_weight[i];
            num += h[i] * u * w;
            den += u * u * w;
        }
        steiner[c] = num / den;
    }
    let mut rho_minus = f64::INFINITY;
    let mut rho_plus = f64::NEG_INFINITY;
    for i in 0..count {
        let u = state.normal_components(i);
        let shift: f64 = steiner.iter().zip(&u).map(|(s, ui)| s * ui).sum();
        let centered = h[i] - shift;
        rho_minus = rho_minus.min(centered);
        rho_plus = rho_plus.max(centered);
    }
    let n = curv.n as f64;
    let pinch_ratio = curv.pinch_ratio();
    let ratio = rho_plus / rho_minus;
    let bound = (n + 2.0) / std::f64::consts::SQRT_2 * pinch_ratio;
    RadiiBounds {
        rho_minus,
        rho_plus,
        steiner,
        ratio,
        pinch_ratio,
        bound,
        within_bound: ratio <= bound * (1.0 + 1e-12),
    }
}
