//! Constructors for initial bodies and the spheroid closed-form oracle.
//!
//! All bodies are given by their support function. A spheroid with
//! equatorial semi-axis `a` and polar semi-axis `c` has
//! `h(theta) = sqrt(a^2 sin^2 theta + c^2 cos^2 theta)`, and its principal
//! radii have the closed forms `R_rot = a^2 / h` and
//! `R_mer = a^2 c^2 / h^3`, which make it the workhorse oracle for
//! convergence checks.

use super::{AxisymProfile, GeomError, SphereGrid2D};
use std::f64::consts::PI;

/// Round sphere of the given radius as an axisymmetric profile.
pub fn sphere_profile(n: usize, intervals: usize, radius: f64) -> AxisymProfile {
    AxisymProfile::new(n, vec![radius; intervals + 1])
        .expect("constant positive support is always valid")
}

/// Spheroid `x_1^2/a^2 + ... + x_n^2/a^2 + x_{n+1}^2/c^2 = 1` as an
/// axisymmetric profile; `theta` is the polar angle from the `x_{n+1}` axis.
pub fn spheroid_profile(n: usize, intervals: usize, a: f64, c: f64) -> AxisymProfile {
    let oracle = SpheroidOracle::new(a, c);
    let h = (0..=intervals)
        .map(|j| oracle.support(j as f64 * PI / intervals as f64))
        .collect();
    AxisymProfile::new(n, h).expect("spheroid support is positive")
}

/// Sphere of radius `r` perturbed by a zonal harmonic:
/// `h = r (1 + amp * P_l(cos theta))`. Fails if the amplitude breaks
/// positivity or strict convexity.
pub fn perturbed_sphere_profile(
    n: usize,
    intervals: usize,
    radius: f64,
    amp: f64,
    l: usize,
) -> Result<AxisymProfile, GeomError> {
    let h = (0..=intervals)
        .map(|j| {
            let th = j as f64 * PI / intervals as f64;
            radius * (1.0 + amp * legendre(l, th.cos()))
        })
        .collect();
    let profile = AxisymProfile::new(n, h)?;
    profile.principal_radii()?;
    Ok(profile)
}

/// Round sphere on the latitude/longitude grid.
pub fn sphere_grid(intervals_theta: usize, intervals_phi: usize, radius: f64) -> SphereGrid2D {
    SphereGrid2D::from_fn(intervals_theta, intervals_phi, |_, _| radius)
        .expect("constant positive support is always valid")
}

/// General ellipsoid with semi-axes `(a, b, c)` along `(x, y, z)`:
/// `h(u) = sqrt(a^2 u_x^2 + b^2 u_y^2 + c^2 u_z^2)`.
pub fn ellipsoid_grid(
    intervals_theta: usize,
    intervals_phi: usize,
    semi_axes: [f64; 3],
) -> SphereGrid2D {
    let [a, b, c] = semi_axes;
    SphereGrid2D::from_fn(intervals_theta, intervals_phi, |theta, phi| {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let x = a * st * cp;
        let y = b * st * sp;
        let z = c * ct;
        (x * x + y * y + z * z).sqrt()
    })
    .expect("ellipsoid support is positive")
}

/// Sphere of radius `r` perturbed by a real surface harmonic:
/// `h = r (1 + amp * P_l^m(cos theta) cos(m phi))`. The `m = 0` case is the
/// zonal perturbation; `m >= 1` harmonics vanish at the poles, so the shared
/// pole values stay consistent. Fails if the amplitude breaks convexity.
pub fn perturbed_sphere_grid(
    intervals_theta: usize,
    intervals_phi: usize,
    radius: f64,
    amp: f64,
    l: usize,
    m: usize,
) -> Result<SphereGrid2D, GeomError> {
    if m > l {
        return Err(GeomError::Mismatch(format!(
            "harmonic order m = {m} exceeds degree l = {l}"
        )));
    }
    let grid = SphereGrid2D::from_fn(intervals_theta, intervals_phi, |theta, phi| {
        radius * (1.0 + amp * assoc_legendre(l, m, theta.cos()) * (m as f64 * phi).cos())
    })?;
    grid.curvatures()?;
    Ok(grid)
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if l == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..l {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Associated Legendre function `P_l^m(x)` without the Condon-Shortley
/// phase: `P_m^m = (2m-1)!! (1-x^2)^{m/2}`, then the upward recurrence in
/// degree.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    debug_assert!(m <= l);
    if m == 0 {
        return legendre(l, x);
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = (2 * m + 1) as f64 * x * pmm;
    for k in (m + 1)..l {
        let k = k as f64;
        let mf = m as f64;
        let next = ((2.0 * k + 1.0) * x * cur - (k + mf) * prev) / (k + 1.0 - mf);
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form geometry of the spheroid with equatorial semi-axis `a` and
/// polar semi-axis `c`. Support and principal radii hold in every dimension;
/// `volume` and `surface_area` are the `n = 2` (surfaces in `R^3`) formulas.
#[derive(Clone, Copy, Debug)]
pub struct SpheroidOracle {
    pub a: f64,
    pub c: f64,
}

impl SpheroidOracle {
    pub fn new(a: f64, c: f64) -> Self {
        assert!(a > 0.0 && c > 0.0, "semi-axes must be positive");
        Self { a, c }
    }

    /// Support function at polar angle `theta`.
    pub fn support(&self, theta: f64) -> f64 {
        let (s, co) = theta.sin_cos();
        (self.a * self.a * s * s + self.c * self.c * co * co).sqrt()
    }

    /// Meridional principal radius `a^2 c^2 / h^3`.
    pub fn r_meridional(&self, theta: f64) -> f64 {
        let h = self.support(theta);
        self.a * self.a * self.c * self.c / (h * h * h)
    }

    /// Rotational principal radius `a^2 / h`.
    pub fn r_rotational(&self, theta: f64) -> f64 {
        self.a * self.a / self.support(theta)
    }

    /// Enclosed volume `(4 pi / 3) a^2 c`.
    pub fn volume(&self) -> f64 {
        4.0 * PI / 3.0 * self.a * self.a * self.c
    }

    /// Surface area: prolate and oblate closed forms, with the sphere limit
    /// taken exactly when `a == c`.
    pub fn surface_area(&self) -> f64 {
        let (a, c) = (self.a, self.c);
        if a == c {
            return 4.0 * PI * a * a;
        }
        if c > a {
            // prolate: e^2 = 1 - a^2/c^2
            let e = (1.0 - (a / c) * (a / c)).sqrt();
            2.0 * PI * a * a + 2.0 * PI * a * c / e * e.asin()
        } else {
            // oblate: e^2 = 1 - c^2/a^2
            let e = (1.0 - (c / a) * (c / a)).sqrt();
            2.0 * PI * a * a + PI * c * c / e * ((1.0 + e) / (1.0 - e)).ln()
        }
    }
}
