//! Randomized verification of the pointwise inequalities the convergence
//! argument rests on:
//!
//! * class-matched mean bound: concave f satisfies `F <= H/n`, convex f
//!   satisfies `F >= H/n`, with equality exactly for the arithmetic mean;
//! * class-matched trace bound: `sum_i f_i >= 1` (concave), `<= 1` (convex);
//! * divided differences of the gradient: `(f_i - f_j)/(lambda_i - lambda_j)`
//!   is nonpositive for concave f and nonnegative for convex f;
//! * the Maclaurin chain `(E_m / binom(n,m))^(1/m) <= H/n`;
//! * the pinched curvature gap: on `{lambda_i >= eps H}` the trace deficit
//!   `(n|A|^2 - H^2)/H^2` dominates a positive multiple of the umbilicity
//!   deficit `1/n^n - K/H^n`; the sampler reports the empirical infimum of
//!   that multiple.
//!
//! All sampling is seeded and the report serializes byte-identically for a
//! fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    binomial, check_cone, default_registry, esym_value, eval_slice, CurvatureClass, CurvError,
};

/// Roundoff guard for the class-matched inequalities: relative slack applied
/// before a sample counts as a violation, absorbing the equality branches
/// (e.g. the arithmetic mean, where `F = H/n` bitwise).
pub const INEQ_REL_TOL: f64 = 1e-12;

/// Divided differences are skipped when `|lambda_i - lambda_j|` is below this
/// fraction of `|lambda|`; closer pairs only measure roundoff.
pub const DIVIDED_DIFF_SKIP_TOL: f64 = 1e-8;

/// A pinched-gap sample is called degenerate (umbilic up to noise) when the
/// deficit denominator falls below this fraction of its scale `1/n^n`.
const DEGENERATE_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityStats {
    pub checked: u64,
    pub violations: u64,
    /// Smallest signed margin seen; nonnegative means the inequality held.
    pub worst_margin: f64,
    pub worst_lambda: Option<Vec<f64>>,
}

impl InequalityStats {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            worst_lambda: None,
        }
    }

    fn update(&mut self, margin: f64, lambda: &[f64]) {
        self.checked += 1;
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_lambda = Some(lambda.to_vec());
        }
        if margin < -INEQ_REL_TOL {
            self.violations += 1;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecInequalityStats {
    pub spec_name: String,
    pub class: CurvatureClass,
    /// `F` vs `H/n`, oriented by class.
    pub mean_bound: InequalityStats,
    /// `sum_i f_i` vs 1, oriented by class.
    pub trace_bound: InequalityStats,
    /// Sign of gradient divided differences, oriented by class.
    pub divided_differences: InequalityStats,
    pub divided_differences_skipped: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PinchedGapStats {
    pub eps: f64,
    pub checked: u64,
    pub degenerate_skipped: u64,
    /// Empirical infimum of gap/deficit over nondegenerate pinched samples;
    /// infinite when the pinched set contains only umbilic points.
    pub delta_emp: f64,
    pub min_lambda: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaSampleReport {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub specs: Vec<SpecInequalityStats>,
    /// Maclaurin chain on normalized elementary symmetric means.
    pub maclaurin: InequalityStats,
    pub pinched_gap: Vec<PinchedGapStats>,
}

impl LemmaSampleReport {
    /// True when no checked inequality was violated and every pinched-gap
    /// infimum stayed strictly positive.
    pub fn all_hold(&self) -> bool {
        let spec_ok = self.specs.iter().all(|s| {
            s.mean_bound.violations == 0
                && s.trace_bound.violations == 0
                && s.divided_differences.violations == 0
        });
        spec_ok
            && self.maclaurin.violations == 0
            && self.pinched_gap.iter().all(|g| g.delta_emp > 0.0)
    }
}

fn log_uniform_point(rng: &mut ChaCha8Rng, lambda: &mut [f64]) {
    for x in lambda.iter_mut() {
        *x = 10.0_f64.powf(rng.gen_range(-3.0..3.0));
    }
}

/// Samples the registry inequalities at `samples` log-uniform cone points
/// per check, plus dedicated pinched sampling for each `eps`.
pub fn sample_lemma_inequalities(
    n: usize,
    samples: u64,
    seed: u64,
    eps_list: &[f64],
) -> Result<LemmaSampleReport, CurvError> {
    let registry = default_registry(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;

    let mut specs: Vec<SpecInequalityStats> = registry
        .iter()
        .map(|s| SpecInequalityStats {
            spec_name: s.name(),
            class: s.class(),
            mean_bound: InequalityStats::new(),
            trace_bound: InequalityStats::new(),
            divided_differences: InequalityStats::new(),
            divided_differences_skipped: 0,
        })
        .collect();
    let mut maclaurin = InequalityStats::new();

    let mut lambda = vec![0.0; n];
    for _ in 0..samples {
        log_uniform_point(&mut rng, &mut lambda);
        check_cone(&lambda)?;
        let h1 = esym_value(&lambda, 1);
        let mean = h1 / nf;
        let norm: f64 = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();

        // Maclaurin chain: p_m^(1/m) <= p_1 for the normalized means.
        for m in 2..=n {
            let pm = esym_value(&lambda, m) / binomial(n, m);
            let margin = (mean - pm.powf(1.0 / m as f64)) / mean;
            maclaurin.update(margin, &lambda);
        }

        for (spec, stats) in registry.iter().zip(specs.iter_mut()) {
            let b = eval_slice(spec, &lambda)?;
            let trace: f64 = b.gradient.iter().sum();
            let (mean_margin, trace_margin) = match spec.class() {
                CurvatureClass::Concave => ((mean - b.value) / mean, trace - 1.0),
                CurvatureClass::Convex => ((b.value - mean) / mean, 1.0 - trace),
            };
            stats.mean_bound.update(mean_margin, &lambda);
            stats.trace_bound.update(trace_margin, &lambda);

            for i in 0..n {
                for j in (i + 1)..n {
                    let dl = lambda[i] - lambda[j];
                    if dl.abs() < DIVIDED_DIFF_SKIP_TOL * norm {
                        stats.divided_differences_skipped += 1;
                        continue;
                    }
                    let dd = (b.gradient[i] - b.gradient[j]) / dl;
                    // Normalize by a local gradient scale so the margin is
                    // dimensionless.
                    let scale =
                        (b.gradient[i].abs() + b.gradient[j].abs()) / dl.abs() + 1e-300;
                    let margin = match spec.class() {
                        CurvatureClass::Concave => -dd / scale,
                        CurvatureClass::Convex => dd / scale,
                    };
                    stats.divided_differences.update(margin, &lambda);
                }
            }
        }
    }

    // Pinched-gap sampling: directions on the simplex slice
    // {x_i >= eps, sum x_i = 1} via a shifted uniform Dirichlet draw. Both
    // sides of the inequality are homogeneous of degree zero, so sampling
    // directions loses nothing.
    let mut pinched_gap = Vec::new();
    for &eps in eps_list {
        let mut stats = PinchedGapStats {
            eps,
            checked: 0,
            degenerate_skipped: 0,
            delta_emp: f64::INFINITY,
            min_lambda: None,
        };
        let slack = 1.0 - nf * eps;
        if slack >= 0.0 {
            let mut dir = vec![0.0; n];
            for _ in 0..samples {
                let mut total = 0.0;
                for d in dir.iter_mut() {
                    // Exponential draws normalized to the simplex give the
                    // uniform distribution on it.
                    let u: f64 = rng.gen_range(0.0..1.0);
                    *d = -(1.0 - u).ln();
                    total += *d;
                }
                for (x, d) in lambda.iter_mut().zip(&dir) {
                    *x = eps + slack * d / total;
                }
                let h = esym_value(&lambda, 1);
                let k = esym_value(&lambda, n);
                let a2: f64 = lambda.iter().map(|x| x * x).sum();
                let gap = (nf * a2 - h * h) / (h * h);
                let deficit = 1.0 / nf.powi(n as i32) - k / h.powi(n as i32);
                if deficit <= DEGENERATE_REL_TOL / nf.powi(n as i32) {
                    stats.degenerate_skipped += 1;
                    continue;
                }
                stats.checked += 1;
                let ratio = gap / deficit;
                if ratio < stats.delta_emp {
                    stats.delta_emp = ratio;
                    stats.min_lambda = Some(lambda.clone());
                }
            }
        } else {
            // eps > 1/n: the pinched set is empty.
            stats.degenerate_skipped = samples;
        }
        pinched_gap.push(stats);
    }

    Ok(LemmaSampleReport {
        n,
        samples,
        seed,
        specs,
        maclaurin,
        pinched_gap,
    })
}
