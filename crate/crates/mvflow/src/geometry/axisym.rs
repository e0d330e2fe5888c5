//! Axisymmetric support profiles: `h(theta)` on a uniform grid over
//! `[0, pi]`, rotationally symmetric about the polar axis.
//!
//! The principal radii split into one meridional value `h'' + h` and the
//! rotational value `h' cot(theta) + h` carried with multiplicity `n - 1`.
//! At the poles both collapse to `h'' + h` (umbilic points). Derivatives
//! are fourth-order centered stencils in difference form; pole stencils use
//! the even reflection `h(-theta) = h(theta)`, which encodes the smooth-axis
//! condition `h'(0) = h'(pi) = 0` exactly.

use super::{sphere_area, CurvatureData, GeomError, MIN_INTERVALS, MIN_RESAMPLE_INTERVALS, RADII_FLOOR_REL};
use crate::curvfun::MAX_DIM;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct AxisymProfile {
    n: usize,
    h: Vec<f64>,
}

impl AxisymProfile {
    /// Wraps support values at `theta_j = j pi / N`, `j = 0..=N`, where
    /// `N = h.len() - 1` is the interval count.
    pub fn new(n: usize, h: Vec<f64>) -> Result<Self, GeomError> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(GeomError::Mismatch(format!(
                "hypersurface dimension n = {n} outside 2..={MAX_DIM}"
            )));
        }
        if h.len() < MIN_INTERVALS + 1 {
            return Err(GeomError::GridTooCoarse(format!(
                "need at least {} nodes, got {}",
                MIN_INTERVALS + 1,
                h.len()
            )));
        }
        for (node, &value) in h.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeomError::BadSupport { node, value });
            }
        }
        Ok(Self { n, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Interval count N; the grid has N + 1 nodes.
    pub fn intervals(&self) -> usize {
        self.h.len() - 1
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.intervals() as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * PI / self.intervals() as f64
    }

    pub fn support(&self) -> &[f64] {
        &self.h
    }

    /// Mutable support values for integrators. Positivity and convexity are
    /// re-validated at the next curvature evaluation.
    pub fn support_mut(&mut self) -> &mut [f64] {
        &mut self.h
    }

    /// First and second theta-derivatives at node `j`, fourth order, with
    /// even reflection across the poles. Written as combinations of
    /// differences `h_k - h_j` so constants are annihilated exactly.
    fn derivs(&self, j: usize) -> (f64, f64) {
        let h = &self.h;
        let nn = self.intervals();
        let dt = self.dtheta();
        // Reflected index lookup: -k maps to k, N + k maps to N - k.
        let at = |i: isize| -> f64 {
            let i = if i < 0 {
                (-i) as usize
            } else if i as usize > nn {
                2 * nn - i as usize
            } else {
                i as usize
            };
            h[i]
        };
        let j = j as isize;
        let c = at(j);
        let dm2 = at(j - 2) - c;
        let dm1 = at(j - 1) - c;
        let dp1 = at(j + 1) - c;
        let dp2 = at(j + 2) - c;
        let d1 = (8.0 * (dp1 - dm1) - (dp2 - dm2)) / (12.0 * dt);
        let d2 = (16.0 * (dp1 + dm1) - (dp2 + dm2)) / (12.0 * dt * dt);
        (d1, d2)
    }

    /// Per-node principal radii `[meridional, rotational]`. The rotational
    /// entry repeats `n - 1` times in the full radii list; at the poles both
    /// agree. Errors with the offending node on convexity loss.
    pub fn principal_radii(&self) -> Result<Vec<[f64; 2]>, GeomError> {
        let nn = self.intervals();
        let max_h = self.h.iter().cloned().fold(0.0_f64, f64::max);
        let floor = RADII_FLOOR_REL * max_h;
        let mut out = Vec::with_capacity(nn + 1);
        for j in 0..=nn {
            let (d1, d2) = self.derivs(j);
            let r_mer = d2 + self.h[j];
            let r_rot = if j == 0 || j == nn {
                r_mer
            } else {
                let th = self.theta(j);
                d1 * th.cos() / th.sin() + self.h[j]
            };
            for (_, r) in [(0, r_mer), (1, r_rot)] {
                if !(r > floor) || !r.is_finite() {
                    return Err(GeomError::ConvexityLoss {
                        node: j,
                        radius: r,
                        floor,
                    });
                }
            }
            out.push([r_mer, r_rot]);
        }
        Ok(out)
    }

    /// Sphere-measure quadrature weights per node: trapezoid in theta with
    /// the Euler-Maclaurin pole correction (see the module docs).
    pub fn sphere_weights(&self) -> Vec<f64> {
        let nn = self.intervals();
        let dt = self.dtheta();
        let band = sphere_area(self.n - 1);
        let mut w = vec![0.0; nn + 1];
        for (j, wj) in w.iter_mut().enumerate().take(nn).skip(1) {
            *wj = band * self.theta(j).sin().powi(self.n as i32 - 1) * dt;
        }
        if self.n == 2 {
            let pole = band * dt * dt / 12.0;
            w[0] = pole;
            w[nn] = pole;
        }
        w
    }

    /// Full curvature data: radii, sorted curvatures, and measure weights.
    pub fn curvatures(&self) -> Result<CurvatureData, GeomError> {
        let n = self.n;
        let radii2 = self.principal_radii()?;
        let sphere_weight = self.sphere_weights();
        let count = radii2.len();
        let mut radii = Vec::with_capacity(count * n);
        let mut lambda = Vec::with_capacity(count * n);
        let mut weight = Vec::with_capacity(count);
        for (j, &[r_mer, r_rot]) in radii2.iter().enumerate() {
            radii.push(r_mer);
            for _ in 1..n {
                radii.push(r_rot);
            }
            // lambda sorted ascending: curvatures invert the radii order.
            let (lam_mer, lam_rot) = (1.0 / r_mer, 1.0 / r_rot);
            if lam_mer <= lam_rot {
                lambda.push(lam_mer);
                for _ in 1..n {
                    lambda.push(lam_rot);
                }
            } else {
                for _ in 1..n {
                    lambda.push(lam_rot);
                }
                lambda.push(lam_mer);
            }
            let area_density = r_mer * r_rot.powi(n as i32 - 1);
            weight.push(area_density * sphere_weight[j]);
        }
        Ok(CurvatureData {
            n,
            node_count: count,
            radii,
            lambda,
            weight,
            sphere_weight,
        })
    }

    /// Cubic reinterpolation onto `intervals` uniform intervals, preserving
    /// the even pole symmetry. Resampling onto the same grid reproduces the
    /// profile exactly.
    pub fn resample(&self, intervals: usize) -> Result<Self, GeomError> {
        if intervals < MIN_RESAMPLE_INTERVALS {
            return Err(GeomError::GridTooCoarse(format!(
                "resample target must have at least {MIN_RESAMPLE_INTERVALS} intervals, got {intervals}"
            )));
        }
        let nn = self.intervals();
        let at = |i: isize| -> f64 {
            let i = if i < 0 {
                (-i) as usize
            } else if i as usize > nn {
                2 * nn - i as usize
            } else {
                i as usize
            };
            self.h[i]
        };
        let mut out = Vec::with_capacity(intervals + 1);
        for j2 in 0..=intervals {
            let s = j2 as f64 * nn as f64 / intervals as f64;
            let base = (s.floor() as usize).min(nn - 1);
            let t = s - base as f64;
            // 4-point Lagrange at offsets -1, 0, 1, 2.
            let wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
            let w0 = (t * t - 1.0) * (t - 2.0) / 2.0;
            let w1 = -t * (t + 1.0) * (t - 2.0) / 2.0;
            let w2 = t * (t * t - 1.0) / 6.0;
            let b = base as isize;
            out.push(
                wm1 * at(b - 1) + w0 * at(b) + w1 * at(b + 1) + w2 * at(b + 2),
            );
        }
        Self::new(self.n, out)
    }
}

/// Free-function form of [`AxisymProfile::principal_radii`].
pub fn principal_radii_axisym(profile: &AxisymProfile) -> Result<Vec<[f64; 2]>, GeomError> {
    profile.principal_radii()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        mixed_volume, mixed_volumes_all, radii_bounds, sphere_profile, spheroid_profile,
        surface_area, unit_ball_volume, GeometryState, SpheroidOracle,
    };
    use approx::assert_relative_eq;

    #[test]
    fn sphere_radii_are_exact() {
        for n in [2usize, 3, 5] {
            let p = sphere_profile(n, 64, 2.5);
            let radii = p.principal_radii().unwrap();
            for r in radii {
                // Difference-form stencils annihilate constants exactly.
                assert_eq!(r[0], 2.5);
                assert_eq!(r[1], 2.5);
            }
        }
    }

    #[test]
    fn sphere_total_measure_matches_sphere_area() {
        for n in [2usize, 3, 4, 5] {
            let p = sphere_profile(n, 128, 1.0);
            let curv = p.curvatures().unwrap();
            let total = surface_area(&curv);
            assert_relative_eq!(total, sphere_area(n), max_relative = 1e-8);
        }
    }

    #[test]
    fn ball_mixed_volumes_equal_omega() {
        for n in [2usize, 3] {
            let p = sphere_profile(n, 128, 1.0);
            let curv = p.curvatures().unwrap();
            let omega = unit_ball_volume(n + 1);
            for m in -1..=(n as i64) {
                let v = mixed_volume(p.support(), &curv, m).unwrap();
                assert_relative_eq!(v, omega, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn ball_mixed_volumes_scale_exactly() {
        // Scaling h by k scales radii linearly and weights by k^n, so
        // V_{n-m} picks up exactly k^{n-m} with no quadrature error drift.
        let n = 3usize;
        let k = 1.7;
        let p1 = sphere_profile(n, 64, 1.0);
        let pk = sphere_profile(n, 64, k);
        let c1 = p1.curvatures().unwrap();
        let ck = pk.curvatures().unwrap();
        for m in -1..=(n as i64) {
            let v1 = mixed_volume(p1.support(), &c1, m).unwrap();
            let vk = mixed_volume(pk.support(), &ck, m).unwrap();
            let power = (n as i64 - m) as i32;
            assert_relative_eq!(vk, v1 * k.powi(power), max_relative = 1e-13);
        }
    }

    #[test]
    fn spheroid_radii_match_closed_form() {
        let (a, c) = (1.0, 1.6);
        let oracle = SpheroidOracle::new(a, c);
        let p = spheroid_profile(2, 256, a, c);
        let radii = p.principal_radii().unwrap();
        for (j, r) in radii.iter().enumerate() {
            let th = p.theta(j);
            assert_relative_eq!(r[0], oracle.r_meridional(th), max_relative = 2e-7);
            assert_relative_eq!(r[1], oracle.r_rotational(th), max_relative = 2e-7);
        }
    }

    #[test]
    fn spheroid_radii_converge_at_fourth_order() {
        let (a, c) = (1.0, 1.6);
        let oracle = SpheroidOracle::new(a, c);
        let err = |intervals: usize| -> f64 {
            let p = spheroid_profile(2, intervals, a, c);
            let radii = p.principal_radii().unwrap();
            let mut worst = 0.0_f64;
            for (j, r) in radii.iter().enumerate() {
                let th = p.theta(j);
                worst = worst.max((r[0] - oracle.r_meridional(th)).abs());
                worst = worst.max((r[1] - oracle.r_rotational(th)).abs());
            }
            worst
        };
        let e1 = err(32);
        let e2 = err(64);
        let e3 = err(128);
        let order12 = (e1 / e2).log2();
        let order23 = (e2 / e3).log2();
        assert!(order12 > 3.5, "observed order {order12}");
        assert!(order23 > 3.5, "observed order {order23}");
    }

    #[test]
    fn poles_are_umbilic() {
        let p = spheroid_profile(3, 64, 1.0, 1.4);
        let radii = p.principal_radii().unwrap();
        let last = radii.len() - 1;
        assert_eq!(radii[0][0], radii[0][1]);
        assert_eq!(radii[last][0], radii[last][1]);
    }

    #[test]
    fn spheroid_area_and_volume_match_closed_forms() {
        let (a, c) = (1.0, 1.6);
        let oracle = SpheroidOracle::new(a, c);
        let p = spheroid_profile(2, 256, a, c);
        let curv = p.curvatures().unwrap();
        assert_relative_eq!(
            surface_area(&curv),
            oracle.surface_area(),
            max_relative = 1e-7
        );
        let vol = mixed_volume(p.support(), &curv, -1).unwrap();
        assert_relative_eq!(vol, oracle.volume(), max_relative = 1e-7);
    }

    #[test]
    fn oblate_spheroid_also_matches() {
        let (a, c) = (1.5, 0.9);
        let oracle = SpheroidOracle::new(a, c);
        let p = spheroid_profile(2, 256, a, c);
        let curv = p.curvatures().unwrap();
        assert_relative_eq!(
            surface_area(&curv),
            oracle.surface_area(),
            max_relative = 1e-7
        );
        assert_relative_eq!(
            mixed_volume(p.support(), &curv, -1).unwrap(),
            oracle.volume(),
            max_relative = 1e-7
        );
    }

    #[test]
    fn mixed_volume_rejects_bad_index() {
        let p = sphere_profile(2, 32, 1.0);
        let curv = p.curvatures().unwrap();
        assert!(mixed_volume(p.support(), &curv, -2).is_err());
        assert!(mixed_volume(p.support(), &curv, 3).is_err());
    }

    #[test]
    fn mixed_volumes_all_agrees_with_single_calls() {
        let p = spheroid_profile(3, 64, 1.0, 1.3);
        let curv = p.curvatures().unwrap();
        let all = mixed_volumes_all(p.support(), &curv);
        for m in -1..=3i64 {
            let v = mixed_volume(p.support(), &curv, m).unwrap();
            assert_relative_eq!(all[(m + 1) as usize], v, max_relative = 1e-15);
        }
    }

    #[test]
    fn steiner_recentering_is_translation_invariant() {
        let p = spheroid_profile(2, 128, 1.0, 1.3);
        let state = GeometryState::Axisym(p.clone());
        let curv = state.curvatures().unwrap();
        let base = radii_bounds(&state, &curv);

        // Shift along the axis: h += v cos(theta).
        let v = 0.37;
        let mut shifted = p.clone();
        for j in 0..shifted.support().len() {
            let th = shifted.theta(j);
            shifted.support_mut()[j] += v * th.cos();
        }
        let state_s = GeometryState::Axisym(shifted);
        let curv_s = state_s.curvatures().unwrap();
        let moved = radii_bounds(&state_s, &curv_s);
        assert_relative_eq!(moved.steiner[0], base.steiner[0] + v, epsilon = 1e-12);
        assert_relative_eq!(moved.rho_minus, base.rho_minus, epsilon = 1e-12);
        assert_relative_eq!(moved.rho_plus, base.rho_plus, epsilon = 1e-12);
    }

    #[test]
    fn spheroid_support_bounds_are_the_semi_axes() {
        let (a, c) = (1.0, 1.6);
        let p = spheroid_profile(2, 256, a, c);
        let state = GeometryState::Axisym(p);
        let curv = state.curvatures().unwrap();
        let rb = radii_bounds(&state, &curv);
        assert!(rb.steiner[0].abs() < 1e-14);
        assert_relative_eq!(rb.rho_minus, a, max_relative = 1e-12);
        assert_relative_eq!(rb.rho_plus, c, max_relative = 1e-12);
        assert!(rb.within_bound);
    }

    #[test]
    fn resample_is_exact_on_matching_grid_and_cubic_otherwise() {
        let p = spheroid_profile(2, 64, 1.0, 1.5);
        let same = p.resample(64).unwrap();
        for (a, b) in p.support().iter().zip(same.support()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        let fine = p.resample(256).unwrap();
        let oracle = SpheroidOracle::new(1.0, 1.5);
        let mut worst = 0.0_f64;
        for j in 0..=256 {
            let th = fine.theta(j);
            worst = worst.max((fine.support()[j] - oracle.support(th)).abs());
        }
        assert!(worst < 2e-6, "cubic resample error {worst}");
        // Downsample from the finer grid is also fine but bounded.
        let coarse = fine.resample(32).unwrap();
        assert_eq!(coarse.intervals(), 32);
    }

    #[test]
    fn resample_rejects_tiny_targets() {
        let p = sphere_profile(2, 64, 1.0);
        assert!(p.resample(8).is_err());
    }

    #[test]
    fn non_convex_profile_reports_offending_node() {
        // A deep high-frequency dent drives the meridional radius negative.
        let nn = 64usize;
        let mut h = vec![1.0; nn + 1];
        for (j, v) in h.iter_mut().enumerate() {
            let th = j as f64 * PI / nn as f64;
            *v += 0.2 * (8.0 * th).cos();
        }
        let p = AxisymProfile::new(2, h).unwrap();
        match p.principal_radii() {
            Err(GeomError::ConvexityLoss { node, radius, .. }) => {
                assert!(radius <= 0.0 || radius.abs() < 1.0);
                assert!(node <= nn);
            }
            other => panic!("expected convexity loss, got {other:?}"),
        }
    }

    #[test]
    fn constructor_rejects_bad_support() {
        assert!(AxisymProfile::new(2, vec![1.0; 5]).is_err());
        let mut h = vec![1.0; 33];
        h[7] = -0.2;
        assert!(AxisymProfile::new(2, h).is_err());
        let mut h2 = vec![1.0; 33];
        h2[3] = f64::NAN;
        assert!(AxisymProfile::new(2, h2).is_err());
    }
}
