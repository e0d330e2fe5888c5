//! Volume- and mixed-volume-preserving curvature flows of strictly convex
//! hypersurfaces in `R^{n+1}`, driven by powers of degree-one homogeneous
//! curvature functions.
//!
//! A convex body is tracked through its support function `h` on the unit
//! sphere. Each point moves in the normal direction with speed
//! `phibar(t) - F(lambda)^beta`, where `F` is a symmetric function of the
//! principal curvatures and the global term `phibar` is chosen so that one
//! designated mixed volume stays constant. The crate is organized as
//!
//! * [`curvfun`]: symmetric-function algebra on the positive cone — the
//!   curvature function registry, its derivatives, and samplers that probe
//!   the structural inequalities the flow relies on;
//! * [`geometry`]: discrete support-function backends (axisymmetric profile
//!   and full latitude/longitude sphere grid), principal radii, quadrature,
//!   and mixed volumes;
//! * [`flow`]: the normalized flow integrator with adaptive explicit
//!   stepping and exact discrete conservation of the pinned mixed volume;
//! * [`analysis`]: per-step monitors (pinching ratios, umbilicity deficit,
//!   speed bounds), monotonicity audits, decay-rate fits, and the
//!   limit-sphere check.

// Two idioms clippy dislikes are load-bearing here: index loops walk several
// same-length arrays at matching offsets in the stencil kernels, and negated
// comparisons like `!(x > 0.0)` reject NaN where `x <= 0.0` would accept it.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod curvfun;
pub mod flow;
pub mod geometry;
