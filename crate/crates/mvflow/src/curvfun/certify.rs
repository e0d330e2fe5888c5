//! Monte Carlo certification of the structural conditions a curvature
//! function must satisfy: strict monotonicity on the positive cone, a
//! definite-sign Hessian (convex or concave), and concavity of the inverse
//! transforms used by the convergence theory.
//!
//! Sampling is log-uniform on `[1e-3, 1e3]^n`, reproducible from a seed.
//! Degree-one homogeneity makes 0 an exact Hessian eigenvalue along the
//! radial direction, so definiteness is judged with a relative tolerance
//! against the spectral scale of each sample.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{eval_slice, CurvatureSpec, CurvError};

/// Relative eigenvalue tolerance for calling a sampled Hessian semidefinite.
pub const CERTIFY_REL_TOL: f64 = 1e-8;

/// The normalization scale of a transform Hessian is floored at this
/// fraction of the largest term magnitude that entered its assembly. Some
/// transforms cancel to the zero matrix analytically (the dual of the
/// harmonic mean is linear); without the floor their roundoff residue would
/// be measured against itself and read as a violation.
const ASSEMBLY_FLOOR_REL: f64 = 1e-5;

/// Exponent range of the log-uniform cone sampler: entries are
/// `10^U(-LOG_RANGE, LOG_RANGE)`.
const LOG_RANGE: f64 = 3.0;

/// Outcome of checking one sign property over all samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyCheck {
    /// True when no sample violated the property beyond [`CERTIFY_REL_TOL`].
    pub certified: bool,
    /// Most adverse normalized margin seen (nonnegative margins are good).
    pub min_margin: f64,
    /// Number of samples beyond tolerance.
    pub violations: u64,
    /// The sample attaining the worst margin.
    pub worst_lambda: Option<Vec<f64>>,
}

impl PropertyCheck {
    fn new() -> Self {
        Self {
            certified: true,
            min_margin: f64::INFINITY,
            violations: 0,
            worst_lambda: None,
        }
    }

    fn update(&mut self, margin: f64, lambda: &[f64]) {
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst_lambda = Some(lambda.to_vec());
        }
        if margin < -CERTIFY_REL_TOL {
            self.violations += 1;
            self.certified = false;
        }
    }
}

/// Empirical certification report for one curvature spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationReport {
    pub spec_name: String,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// Smallest gradient entry seen anywhere; strict monotonicity demands
    /// this stays positive.
    pub gradient_min: f64,
    pub monotone: bool,
    pub convex: PropertyCheck,
    pub concave: PropertyCheck,
    /// Concavity of `x -> -f(1/x_1, ..., 1/x_n)`, the reciprocal-reflection
    /// transform used by the pinching argument.
    pub inverse_concave_reflection: PropertyCheck,
    /// Concavity of `x -> 1/f(1/x_1, ..., 1/x_n)`, the classical dual form;
    /// reported alongside the reflection form for comparison.
    pub inverse_concave_dual: PropertyCheck,
}

fn min_max_eig(h: &DMatrix<f64>) -> (f64, f64, f64) {
    let eig = h.clone().symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut scale = 0.0_f64;
    for &e in eig.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
        scale = scale.max(e.abs());
    }
    (lo, hi, scale.max(1e-300))
}

/// Draws `samples` log-uniform cone points and accumulates definiteness and
/// monotonicity evidence for `spec` and its inverse transforms.
pub fn certify_conditions(
    spec: &CurvatureSpec,
    samples: u64,
    seed: u64,
) -> Result<CertificationReport, CurvError> {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gradient_min = f64::INFINITY;
    let mut convex = PropertyCheck::new();
    let mut concave = PropertyCheck::new();
    let mut inv_refl = PropertyCheck::new();
    let mut inv_dual = PropertyCheck::new();
    let mut lambda = vec![0.0; n];

    for _ in 0..samples {
        for x in lambda.iter_mut() {
            *x = 10.0_f64.powf(rng.gen_range(-LOG_RANGE..LOG_RANGE));
        }
        let b = eval_slice(spec, &lambda)?;
        for &g in &b.gradient {
            gradient_min = gradient_min.min(g);
        }

        let hess = DMatrix::from_fn(n, n, |i, j| b.hess(i, j));
        let (lo, hi, scale) = min_max_eig(&hess);
        convex.update(lo / scale, &lambda);
        concave.update(-hi / scale, &lambda);

        // Inverse transforms are evaluated at x with y = 1/x the cone point
        // fed to f. Sampling lambda and setting x = 1/lambda covers the same
        // cone. For g(x) = -f(1/x):
        //   g_ij = -f_ij y_i^2 y_j^2 - 2 delta_ij f_i y_i^3,
        // and for d(x) = 1/f(1/x):
        //   d_ij = (2 f_i f_j / f - f_ij) y_i^2 y_j^2 / f^2
        //          - 2 delta_ij f_i y_i^3 / f^2.
        // Concavity of either transform means the matrix is negative
        // semidefinite. Alongside each entry, track the largest absolute
        // term that entered it, as the cancellation scale.
        let y = &lambda; // y = 1/x, i.e. the point where f is evaluated
        let mut refl_terms = 0.0_f64;
        let refl = DMatrix::from_fn(n, n, |i, j| {
            let yy = y[i] * y[i] * y[j] * y[j];
            let mut v = -b.hess(i, j) * yy;
            let mut t = v.abs();
            if i == j {
                let diag = 2.0 * b.gradient[i] * y[i] * y[i] * y[i];
                v -= diag;
                t = t.max(diag.abs());
            }
            refl_terms = refl_terms.max(t);
            v
        });
        let (_, hi_r, scale_r) = min_max_eig(&refl);
        let scale_r = scale_r.max(ASSEMBLY_FLOOR_REL * refl_terms);
        inv_refl.update(-hi_r / scale_r, &lambda);

        let f = b.value;
        let mut dual_terms = 0.0_f64;
        let dual = DMatrix::from_fn(n, n, |i, j| {
            let yy = y[i] * y[i] * y[j] * y[j] / (f * f);
            let t1 = 2.0 * b.gradient[i] * b.gradient[j] / f * yy;
            let t2 = b.hess(i, j) * yy;
            let mut v = t1 - t2;
            let mut t = t1.abs().max(t2.abs());
            if i == j {
                let diag = 2.0 * b.gradient[i] * y[i] * y[i] * y[i] / (f * f);
                v -= diag;
                t = t.max(diag.abs());
            }
            dual_terms = dual_terms.max(t);
            v
        });
        let (_, hi_d, scale_d) = min_max_eig(&dual);
        let scale_d = scale_d.max(ASSEMBLY_FLOOR_REL * dual_terms);
        inv_dual.update(-hi_d / scale_d, &lambda);
    }

    Ok(CertificationReport {
        spec_name: spec.name(),
        n,
        samples,
        seed,
        gradient_min,
        monotone: gradient_min > 0.0,
        convex,
        concave,
        inverse_concave_reflection: inv_refl,
        inverse_concave_dual: inv_dual,
    })
}
