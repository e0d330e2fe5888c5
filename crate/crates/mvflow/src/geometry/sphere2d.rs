//! General (non-axisymmetric) surfaces in `R^3` on a latitude/longitude
//! grid of the support function, with single shared values at the two poles.
//!
//! Interior nodes use second-order centered stencils, written in difference
//! form so constants are annihilated exactly. In the orthonormal frame
//! `(d_theta, d_phi / sin theta)` the radii matrix of `r = Hess h + h g` is
//!
//! ```text
//! A11 = h_tt + h
//! A12 = (h_tp - cot(t) h_p) / sin(t)
//! A22 = h_pp / sin^2(t) + cot(t) h_t + h
//! ```
//!
//! and the principal radii are its eigenvalues. At a pole the radii come
//! from the first ring of neighbors by harmonic analysis: with plain ring
//! means `m1` of `h`, `c2` of `(h - m1) cos 2 phi` and `s2` of
//! `(h - m1) sin 2 phi`, the trace and deviator of the tangent Hessian are
//! `tr = 4 (m1 - h_pole) / dt^2`, `P - S = 8 c2 / dt^2`, `Q = 4 s2 / dt^2`,
//! which are exact zeros on a round sphere because the sums are taken over
//! differences.

use super::{sphere_area, CurvatureData, GeomError, MIN_INTERVALS, MIN_RESAMPLE_INTERVALS, RADII_FLOOR_REL};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid2D {
    n_theta: usize,
    n_phi: usize,
    /// Node 0 is the north pole, nodes `1..=(n_theta-1)*n_phi` the interior
    /// rings in row-major order, the last node the south pole.
    h: Vec<f64>,
}

impl SphereGrid2D {
    pub fn new(n_theta: usize, n_phi: usize, h: Vec<f64>) -> Result<Self, GeomError> {
        if n_theta < MIN_INTERVALS || n_phi < MIN_INTERVALS {
            return Err(GeomError::GridTooCoarse(format!(
                "need at least {MIN_INTERVALS} intervals per direction, got {n_theta} x {n_phi}"
            )));
        }
        if !n_phi.is_multiple_of(2) {
            return Err(GeomError::GridTooCoarse(format!(
                "azimuthal interval count must be even, got {n_phi}"
            )));
        }
        let count = 2 + (n_theta - 1) * n_phi;
        if h.len() != count {
            return Err(GeomError::Mismatch(format!(
                "grid {n_theta} x {n_phi} needs {count} nodes, got {}",
                h.len()
            )));
        }
        for (node, &value) in h.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeomError::BadSupport { node, value });
            }
        }
        Ok(Self { n_theta, n_phi, h })
    }

    /// Samples `f(theta, phi)`; the poles take `f(0, 0)` and `f(pi, 0)`, so
    /// `f` must be azimuth-independent there.
    pub fn from_fn(
        n_theta: usize,
        n_phi: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, GeomError> {
        let dt = PI / n_theta as f64;
        let dp = 2.0 * PI / n_phi as f64;
        let mut h = Vec::with_capacity(2 + (n_theta - 1) * n_phi);
        h.push(f(0.0, 0.0));
        for i in 1..n_theta {
            for k in 0..n_phi {
                h.push(f(i as f64 * dt, k as f64 * dp));
            }
        }
        h.push(f(PI, 0.0));
        Self::new(n_theta, n_phi, h)
    }

    pub fn intervals_theta(&self) -> usize {
        self.n_theta
    }

    pub fn intervals_phi(&self) -> usize {
        self.n_phi
    }

    pub fn node_count(&self) -> usize {
        self.h.len()
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    /// Flat node index of grid position `(ring i, column k)`; the pole rows
    /// `i = 0` and `i = n_theta` collapse to their single node for any `k`.
    pub fn index_of(&self, i: usize, k: usize) -> usize {
        if i == 0 {
            0
        } else if i == self.n_theta {
            self.h.len() - 1
        } else {
            1 + (i - 1) * self.n_phi + (k % self.n_phi)
        }
    }

    /// (theta, phi) of a node; the poles report `phi = 0`.
    pub fn node_angles(&self, node: usize) -> (f64, f64) {
        if node == 0 {
            (0.0, 0.0)
        } else if node == self.h.len() - 1 {
            (PI, 0.0)
        } else {
            let i = 1 + (node - 1) / self.n_phi;
            let k = (node - 1) % self.n_phi;
            (i as f64 * self.dtheta(), k as f64 * self.dphi())
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.h
    }

    pub fn support_mut(&mut self) -> &mut [f64] {
        &mut self.h
    }

    /// Outward unit normal of a node.
    pub fn normal(&self, node: usize) -> [f64; 3] {
        let (theta, phi) = self.node_angles(node);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Effective stencil spacing for stability limits. Interior nodes see
    /// second-difference operators along both grid directions, so the
    /// per-axis limits combine harmonically: `1/s^2 = 1/dtheta^2 +
    /// 1/(sin(theta) dphi)^2`. The azimuthal term shrinks toward the poles
    /// and dominates there.
    pub fn spacing(&self, node: usize) -> f64 {
        let dt = self.dtheta();
        if node == 0 || node == self.h.len() - 1 {
            return dt;
        }
        let (theta, _) = self.node_angles(node);
        let dp = theta.sin() * self.dphi();
        1.0 / (1.0 / (dt * dt) + 1.0 / (dp * dp)).sqrt()
    }

    fn value(&self, i: usize, k: usize) -> f64 {
        self.h[self.index_of(i, k)]
    }

    /// Principal radii at a pole from its first ring of neighbors. `h0` is
    /// the pole value; `ring` is the adjacent interior ring index.
    fn pole_radii(&self, h0: f64, ring: usize) -> [f64; 2] {
        let np = self.n_phi as f64;
        let dt = self.dtheta();
        let dp = self.dphi();
        let mut m1 = 0.0;
        for k in 0..self.n_phi {
            m1 += self.value(ring, k) - h0;
        }
        m1 /= np;
        let mut c2 = 0.0;
        let mut s2 = 0.0;
        for k in 0..self.n_phi {
            let d = (self.value(ring, k) - h0) - m1;
            let (s, c) = (2.0 * k as f64 * dp).sin_cos();
            c2 += d * c;
            s2 += d * s;
        }
        c2 /= np;
        s2 /= np;
        let half_trace = 2.0 * m1 / (dt * dt);
        let half_dev = 4.0 * c2 / (dt * dt);
        let q = 4.0 * s2 / (dt * dt);
        let disc = (half_dev * half_dev + q * q).sqrt();
        let mean = h0 + half_trace;
        [mean - disc, mean + disc]
    }

    /// Principal radii `[min, max]` per node.
    pub fn principal_radii(&self) -> Result<Vec<[f64; 2]>, GeomError> {
        let count = self.h.len();
        let max_h = self.h.iter().cloned().fold(0.0_f64, f64::max);
        let floor = RADII_FLOOR_REL * max_h;
        let dt = self.dtheta();
        let dp = self.dphi();
        let mut out = Vec::with_capacity(count);
        out.push(self.pole_radii(self.h[0], 1));
        for i in 1..self.n_theta {
            let theta = i as f64 * dt;
            let (st, ct) = theta.sin_cos();
            let cot = ct / st;
            for k in 0..self.n_phi {
                let c = self.value(i, k);
                let dtp = self.value(i + 1, k) - c;
                let dtm = self.value(i - 1, k) - c;
                let dpp = self.value(i, k + 1) - c;
                let dpm = self.value(i, k + self.n_phi - 1) - c;
                let h_t = (dtp - dtm) / (2.0 * dt);
                let h_tt = (dtp + dtm) / (dt * dt);
                let h_p = (dpp - dpm) / (2.0 * dp);
                let h_pp = (dpp + dpm) / (dp * dp);
                // Mixed derivative over the four diagonal neighbors; at the
                // rings next to a pole the two pole terms cancel exactly.
                let h_tp = (self.value(i + 1, k + 1) - self.value(i + 1, k + self.n_phi - 1)
                    - self.value(i - 1, k + 1)
                    + self.value(i - 1, k + self.n_phi - 1))
                    / (4.0 * dt * dp);
                let a11 = h_tt + c;
                let a12 = (h_tp - cot * h_p) / st;
                let a22 = h_pp / (st * st) + cot * h_t + c;
                let mean = 0.5 * (a11 + a22);
                let half_gap = 0.5 * (a11 - a22);
                let disc = (half_gap * half_gap + a12 * a12).sqrt();
                out.push([mean - disc, mean + disc]);
            }
        }
        out.push(self.pole_radii(self.h[count - 1], self.n_theta - 1));
        for (node, r) in out.iter().enumerate() {
            if !(r[0] > floor) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(GeomError::ConvexityLoss {
                    node,
                    radius: r[0],
                    floor,
                });
            }
        }
        Ok(out)
    }

    /// Sphere-measure quadrature weights: `sin(theta) dtheta dphi` on the
    /// interior, the Euler-Maclaurin end correction `|S^1| dtheta^2 / 12` at
    /// each pole.
    pub fn sphere_weights(&self) -> Vec<f64> {
        let dt = self.dtheta();
        let dp = self.dphi();
        let count = self.h.len();
        let mut w = vec![0.0; count];
        let pole = sphere_area(1) * dt * dt / 12.0;
        w[0] = pole;
        w[count - 1] = pole;
        for i in 1..self.n_theta {
            let band = (i as f64 * dt).sin() * dt * dp;
            for k in 0..self.n_phi {
                w[self.index_of(i, k)] = band;
            }
        }
        w
    }

    pub fn curvatures(&self) -> Result<CurvatureData, GeomError> {
        let radii2 = self.principal_radii()?;
        let sphere_weight = self.sphere_weights();
        let count = radii2.len();
        let mut radii = Vec::with_capacity(count * 2);
        let mut lambda = Vec::with_capacity(count * 2);
        let mut weight = Vec::with_capacity(count);
        for (node, &[r_min, r_max]) in radii2.iter().enumerate() {
            radii.push(r_min);
            radii.push(r_max);
            lambda.push(1.0 / r_max);
            lambda.push(1.0 / r_min);
            weight.push(r_min * r_max * sphere_weight[node]);
        }
        Ok(CurvatureData {
            n: 2,
            node_count: count,
            radii,
            lambda,
            weight,
            sphere_weight,
        })
    }

    /// Cubic reinterpolation onto a new grid: a theta pass per source column
    /// (reflecting across the poles via the antipodal column), then a
    /// periodic phi pass per target ring. Exact when the grids coincide.
    pub fn resample(&self, n_theta: usize, n_phi: usize) -> Result<Self, GeomError> {
        if n_theta < MIN_RESAMPLE_INTERVALS || n_phi < MIN_RESAMPLE_INTERVALS {
            return Err(GeomError::GridTooCoarse(format!(
                "resample target must have at least {MIN_RESAMPLE_INTERVALS} intervals per direction, got {n_theta} x {n_phi}"
            )));
        }
        if !n_phi.is_multiple_of(2) {
            return Err(GeomError::GridTooCoarse(format!(
                "azimuthal interval count must be even, got {n_phi}"
            )));
        }
        let src_nt = self.n_theta;
        let src_np = self.n_phi;
        // Reflection across a pole lands on the antipodal column:
        // h(-theta, phi) = h(theta, phi + pi).
        let at = |i: isize, k: usize| -> f64 {
            if i < 0 {
                self.value((-i) as usize, k + src_np / 2)
            } else if i as usize > src_nt {
                self.value(2 * src_nt - i as usize, k + src_np / 2)
            } else {
                self.value(i as usize, k)
            }
        };
        // Theta pass: rows at target thetas, columns still at source phis.
        let mut mid = vec![0.0; (n_theta + 1) * src_np];
        for j2 in 0..=n_theta {
            let s = j2 as f64 * src_nt as f64 / n_theta as f64;
            let base = (s.floor() as usize).min(src_nt - 1);
            let t = s - base as f64;
            let wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
            let w0 = (t * t - 1.0) * (t - 2.0) / 2.0;
            let w1 = -t * (t + 1.0) * (t - 2.0) / 2.0;
            let w2 = t * (t * t - 1.0) / 6.0;
            let b = base as isize;
            for k in 0..src_np {
                mid[j2 * src_np + k] =
                    wm1 * at(b - 1, k) + w0 * at(b, k) + w1 * at(b + 1, k) + w2 * at(b + 2, k);
            }
        }
        // Phi pass: periodic cubic along each target ring.
        let mut h = Vec::with_capacity(2 + (n_theta - 1) * n_phi);
        let row = |j2: usize, k: isize| -> f64 {
            let k = k.rem_euclid(src_np as isize) as usize;
            mid[j2 * src_np + k]
        };
        h.push(mid[0]);
        for j2 in 1..n_theta {
            for k2 in 0..n_phi {
                let s = k2 as f64 * src_np as f64 / n_phi as f64;
                let base = s.floor() as isize;
                let t = s - base as f64;
                let wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w0 = (t * t - 1.0) * (t - 2.0) / 2.0;
                let w1 = -t * (t + 1.0) * (t - 2.0) / 2.0;
                let w2 = t * (t * t - 1.0) / 6.0;
                h.push(
                    wm1 * row(j2, base - 1)
                        + w0 * row(j2, base)
                        + w1 * row(j2, base + 1)
                        + w2 * row(j2, base + 2),
                );
            }
        }
        h.push(mid[n_theta * src_np]);
        Self::new(n_theta, n_phi, h)
    }
}
