//! `verify` subcommand: Monte Carlo certification of the whole curvature
//! registry at one dimension — definiteness/monotonicity of each spec plus
//! the structural inequalities the convergence argument leans on.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mvflow::curvfun::{
    certify_conditions, default_registry, sample_lemma_inequalities, CertificationReport,
    CurvatureClass, LemmaSampleReport,
};
use serde::Serialize;

use crate::run::write_json;

/// Pinched-gap thresholds probed by the inequality sampler.
const GAP_EPS: [f64; 2] = [0.1, 0.2];

/// One registry member's certification, reduced to the class it is
/// registered under: a convex spec must certify convexity, a concave one
/// concavity, and both must certify strict monotonicity.
#[derive(Serialize)]
struct SpecVerification {
    name: String,
    class: CurvatureClass,
    /// Monotone and definite on the side the class demands.
    class_matched_certified: bool,
    /// Violations counted against the class-matched properties only.
    violations: u64,
    certification: CertificationReport,
}

#[derive(Serialize)]
struct VerifyReport {
    n: usize,
    samples: u64,
    seed: u64,
    registry: Vec<SpecVerification>,
    inequalities: LemmaSampleReport,
    /// Class-matched certification violations plus inequality violations.
    violations_total: u64,
    all_hold: bool,
}

pub fn cmd_verify(n: usize, samples: u64, seed: u64, out_dir: &Path) -> Result<u8> {
    let mut registry_rows = Vec::new();
    let mut violations_total = 0u64;
    for spec in default_registry(n) {
        let certification = certify_conditions(&spec, samples, seed)?;
        let matched = match spec.class() {
            CurvatureClass::Convex => &certification.convex,
            CurvatureClass::Concave => &certification.concave,
        };
        let violations = matched.violations + u64::from(!certification.monotone);
        violations_total += violations;
        registry_rows.push(SpecVerification {
            name: spec.name(),
            class: spec.class(),
            class_matched_certified: certification.monotone && matched.certified,
            violations,
            certification,
        });
    }

    let inequalities = sample_lemma_inequalities(n, samples, seed, &GAP_EPS)?;
    for s in &inequalities.specs {
        violations_total +=
            s.mean_bound.violations + s.trace_bound.violations + s.divided_differences.violations;
    }
    violations_total += inequalities.maclaurin.violations;

    let all_hold = violations_total == 0
        && registry_rows.iter().all(|r| r.class_matched_certified)
        && inequalities.all_hold();
    let report = VerifyReport {
        n,
        samples,
        seed,
        registry: registry_rows,
        inequalities,
        violations_total,
        all_hold,
    };

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;
    write_json(&out_dir.join("verify_report.json"), &report)?;

    if report.all_hold {
        log::info!(
            "verify n={n}: {} specs certified, zero violations in {samples} samples",
            report.registry.len()
        );
        Ok(0)
    } else {
        eprintln!(
            "verify n={n}: {} violation(s) across the registry; see verify_report.json",
            report.violations_total
        );
        Ok(1)
    }
}
