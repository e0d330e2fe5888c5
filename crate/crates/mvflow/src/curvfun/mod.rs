//! Symmetric-function algebra on the positive cone.
//!
//! Everything the flow knows about its speed law lives here: elementary
//! symmetric polynomials and their derivatives, the registry of admissible
//! curvature functions (all normalized so `f(1,...,1) = 1`, all positively
//! homogeneous of degree one), the chain rule through the outer power
//! `Phi = f^beta`, and Monte Carlo certifiers for the convexity/concavity
//! and inequality structure the convergence theory leans on.

mod certify;
mod sample;

pub use certify::{certify_conditions, CertificationReport, PropertyCheck};
pub use sample::{
    sample_lemma_inequalities, InequalityStats, LemmaSampleReport, PinchedGapStats,
    SpecInequalityStats,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on the hypersurface dimension `n`. Keeps scratch buffers on the
/// stack in the per-node hot path; raise it if anyone ever flows a 17-sphere.
pub const MAX_DIM: usize = 16;

/// Entries must exceed this fraction of the largest entry to count as inside
/// the positive cone. Guards the quotient families against division blowup.
pub const CONE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CurvError {
    #[error("lambda vector needs between 2 and {max} entries, got {got}", max = MAX_DIM)]
    BadDimension { got: usize },
    #[error("entry {index} = {value:e} lies outside the positive cone (floor {floor:e})")]
    ConeViolation { index: usize, value: f64, floor: f64 },
    #[error("symmetric function index m = {m} out of range for n = {n}")]
    IndexOutOfRange { m: usize, n: usize },
    #[error("invalid curvature spec: {0}")]
    InvalidSpec(String),
    #[error("exponent beta = {0} violates the hypothesis beta >= 1")]
    BetaBelowOne(f64),
}

/// Principal curvatures of one surface point, sorted ascending, all strictly
/// inside the positive cone.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaVector {
    entries: Vec<f64>,
}

impl LambdaVector {
    pub fn new(mut entries: Vec<f64>) -> Result<Self, CurvError> {
        check_cone(&entries)?;
        entries.sort_unstable_by(|a, b| a.partial_cmp(b).expect("cone entries are finite"));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn min(&self) -> f64 {
        self.entries[0]
    }

    pub fn max(&self) -> f64 {
        *self.entries.last().expect("nonempty by construction")
    }

    /// lambda_max / lambda_min, the pointwise pinching ratio.
    pub fn pinch_ratio(&self) -> f64 {
        self.max() / self.min()
    }
}

/// Validates that a raw slice lies in the positive cone Gamma_+ with the
/// relative floor [`CONE_REL_TOL`], without sorting or allocating.
pub fn check_cone(entries: &[f64]) -> Result<(), CurvError> {
    if entries.len() < 2 || entries.len() > MAX_DIM {
        return Err(CurvError::BadDimension { got: entries.len() });
    }
    let mut max = 0.0_f64;
    for &x in entries {
        if x.is_finite() && x > max {
            max = x;
        }
    }
    let floor = CONE_REL_TOL * max;
    for (index, &value) in entries.iter().enumerate() {
        // NaN fails this comparison and is rejected alongside the rest.
        if !(value > floor) || !value.is_finite() {
            return Err(CurvError::ConeViolation { index, value, floor });
        }
    }
    Ok(())
}

/// Value, gradient, and Hessian of a symmetric function at one cone point.
/// The Hessian is stored dense row-major; it is symmetric by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl DerivativeBundle {
    pub fn n(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.n() + j]
    }

    pub fn gradient_sum(&self) -> f64 {
        self.gradient.iter().sum()
    }
}

/// Concavity class a registry member is certified against. Determines which
/// side of the `F` vs `H/n` and `sum f_i` vs 1 inequalities must hold, and
/// which pinching monitor (`K/H^n` vs `K/F^n`) the audits track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureClass {
    Convex,
    Concave,
}

/// The five admissible families of degree-one homogeneous curvature
/// functions, before normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CurvFamily {
    /// Arithmetic mean of the principal curvatures, `H/n`. Linear, so it is
    /// simultaneously convex and concave; registered as convex.
    MeanH,
    /// Norm of the second fundamental form, `|lambda| / sqrt(n)`. Convex.
    NormOfA,
    /// Normalized k-th root of the complete homogeneous symmetric polynomial,
    /// `(h_k / binom(n+k-1, k))^(1/k)`. Convex.
    GammaK { k: u32 },
    /// Normalized quotient `(E_m / E_l)^(1/(m-l))` of elementary symmetric
    /// polynomials, `n >= m > l >= 0`. Concave and inverse concave.
    QuotientEml { m: u32, l: u32 },
    /// Power mean `(sum lambda_i^r / n)^(1/r)` with `0 < |r| <= 1`. Concave
    /// and inverse concave.
    PowerMean { r: f64 },
}

/// A registry member pinned to a dimension: family, normalization, and the
/// concavity class its inequalities are checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSpec {
    family: CurvFamily,
    n: usize,
    class: CurvatureClass,
}

impl CurvatureSpec {
    pub fn new(family: CurvFamily, n: usize) -> Result<Self, CurvError> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(CurvError::InvalidSpec(format!(
                "dimension n = {n} outside supported range 2..={MAX_DIM}"
            )));
        }
        let class = match &family {
            CurvFamily::MeanH | CurvFamily::NormOfA => CurvatureClass::Convex,
            CurvFamily::GammaK { k } => {
                if *k < 1 || *k as usize > n {
                    return Err(CurvError::InvalidSpec(format!(
                        "GammaK requires 1 <= k <= n, got k = {k} with n = {n}"
                    )));
                }
                CurvatureClass::Convex
            }
            CurvFamily::QuotientEml { m, l } => {
                if !(*m as usize <= n && m > l) {
                    return Err(CurvError::InvalidSpec(format!(
                        "QuotientEml requires n >= m > l >= 0, got m = {m}, l = {l}, n = {n}"
                    )));
                }
                CurvatureClass::Concave
            }
            CurvFamily::PowerMean { r } => {
                if !(*r != 0.0 && r.abs() <= 1.0 && r.is_finite()) {
                    return Err(CurvError::InvalidSpec(format!(
                        "PowerMean requires 0 < |r| <= 1, got r = {r}"
                    )));
                }
                CurvatureClass::Concave
            }
        };
        Ok(Self { family, n, class })
    }

    pub fn family(&self) -> &CurvFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn class(&self) -> CurvatureClass {
        self.class
    }

    /// Short display name, e.g. `QuotientEml(2,0)` or `PowerMean(-0.5)`.
    pub fn name(&self) -> String {
        match &self.family {
            CurvFamily::MeanH => "MeanH".to_string(),
            CurvFamily::NormOfA => "NormOfA".to_string(),
            CurvFamily::GammaK { k } => format!("GammaK({k})"),
            CurvFamily::QuotientEml { m, l } => format!("QuotientEml({m},{l})"),
            CurvFamily::PowerMean { r } => format!("PowerMean({r})"),
        }
    }
}

/// The default bench of curvature functions exercised by verification runs:
/// every family, both concavity classes, with the dimension-dependent
/// members picked to stay valid for the given `n`.
pub fn default_registry(n: usize) -> Vec<CurvatureSpec> {
    let mut fams = vec![
        CurvFamily::MeanH,
        CurvFamily::NormOfA,
        CurvFamily::GammaK { k: 2 },
    ];
    if n >= 3 {
        fams.push(CurvFamily::GammaK { k: 3 });
    }
    fams.push(CurvFamily::QuotientEml { m: 2, l: 0 });
    fams.push(CurvFamily::QuotientEml {
        m: n as u32,
        l: n as u32 - 1,
    });
    fams.push(CurvFamily::PowerMean { r: -1.0 });
    fams.push(CurvFamily::PowerMean { r: 0.5 });
    fams.into_iter()
        .map(|f| CurvatureSpec::new(f, n).expect("registry families are valid for this n"))
        .collect()
}

// ---------------------------------------------------------------------------
// Elementary and complete homogeneous symmetric polynomials.
// ---------------------------------------------------------------------------

type Buf = [f64; MAX_DIM + 1];

/// Coefficient recurrence for prod_i (t + lambda_i): after feeding every
/// entry, `out[m] = E_m`. Only indices up to `upto` are maintained. All terms
/// are nonnegative for cone input, so no cancellation occurs.
#[inline]
fn esym_into(lambda: &[f64], upto: usize, out: &mut Buf) {
    out[..=upto].fill(0.0);
    out[0] = 1.0;
    for (count, &x) in lambda.iter().enumerate() {
        let hi = upto.min(count + 1);
        for m in (1..=hi).rev() {
            out[m] += x * out[m - 1];
        }
    }
}

/// Same recurrence skipping one entry: elementary symmetric functions of the
/// complement `lambda \ {lambda_skip}`.
#[inline]
fn esym_skip_into(lambda: &[f64], skip: usize, upto: usize, out: &mut Buf) {
    out[..=upto].fill(0.0);
    out[0] = 1.0;
    let mut count = 0;
    for (i, &x) in lambda.iter().enumerate() {
        if i == skip {
            continue;
        }
        let hi = upto.min(count + 1);
        for m in (1..=hi).rev() {
            out[m] += x * out[m - 1];
        }
        count += 1;
    }
}

#[inline]
fn esym_skip2_into(lambda: &[f64], skip_a: usize, skip_b: usize, upto: usize, out: &mut Buf) {
    out[..=upto].fill(0.0);
    out[0] = 1.0;
    let mut count = 0;
    for (i, &x) in lambda.iter().enumerate() {
        if i == skip_a || i == skip_b {
            continue;
        }
        let hi = upto.min(count + 1);
        for m in (1..=hi).rev() {
            out[m] += x * out[m - 1];
        }
        count += 1;
    }
}

/// E_m evaluated on a raw cone slice; no validation, used on the hot path.
#[inline]
pub(crate) fn esym_value(lambda: &[f64], m: usize) -> f64 {
    let mut buf: Buf = [0.0; MAX_DIM + 1];
    esym_into(lambda, m, &mut buf);
    buf[m]
}

/// The m-th elementary symmetric polynomial `E_m(lambda)`, with `E_0 = 1`.
pub fn elementary_symmetric(m: usize, lambda: &LambdaVector) -> Result<f64, CurvError> {
    let n = lambda.n();
    if m > n {
        return Err(CurvError::IndexOutOfRange { m, n });
    }
    Ok(esym_value(lambda.entries(), m))
}

/// Gradient of `E_m`: the i-th component is `E_{m-1}` of the entries with
/// `lambda_i` removed. Computed by direct products over the complement, so
/// every term stays nonnegative.
pub fn elementary_symmetric_gradient(
    m: usize,
    lambda: &LambdaVector,
) -> Result<Vec<f64>, CurvError> {
    let n = lambda.n();
    if m > n {
        return Err(CurvError::IndexOutOfRange { m, n });
    }
    let ent = lambda.entries();
    let mut grad = vec![0.0; n];
    if m == 0 {
        return Ok(grad);
    }
    let mut buf: Buf = [0.0; MAX_DIM + 1];
    for i in 0..n {
        esym_skip_into(ent, i, m - 1, &mut buf);
        grad[i] = buf[m - 1];
    }
    Ok(grad)
}

/// Complete homogeneous symmetric polynomial `h_k` via the with-repetition
/// recurrence: processing an entry with ascending index allows it to be
/// reused, which is exactly the multiset expansion of `h_k`.
#[inline]
fn hsym_into(lambda: &[f64], upto: usize, out: &mut Buf) {
    out[..=upto].fill(0.0);
    out[0] = 1.0;
    for &x in lambda {
        for m in 1..=upto {
            out[m] += x * out[m - 1];
        }
    }
}

/// Extends an `h` table by one more (possibly repeated) entry.
#[inline]
fn hsym_extend(base: &Buf, x: f64, upto: usize, out: &mut Buf) {
    out[..=upto].copy_from_slice(&base[..=upto]);
    for m in 1..=upto {
        out[m] += x * out[m - 1];
    }
}

/// Exact binomial coefficient as f64 (arguments stay tiny here).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

// ---------------------------------------------------------------------------
// Family evaluation.
// ---------------------------------------------------------------------------

/// Workspace for one family evaluation. `gradient[..n]` is always written;
/// `hessian[..n*n]`, when present, selects the full second-order path.
struct EvalOut<'a> {
    gradient: &'a mut [f64],
    hessian: Option<&'a mut [f64]>,
}

/// Evaluates the normalized family at a raw cone slice. The caller has
/// already validated cone membership. Normalization constants are produced
/// by running the identical code path on the all-ones vector, which makes
/// `f(1,...,1) = 1` exact in floating point.
fn eval_family(spec: &CurvatureSpec, lambda: &[f64], out: &mut EvalOut) -> f64 {
    let n = spec.n();
    debug_assert_eq!(lambda.len(), n);
    let nf = n as f64;
    match *spec.family() {
        CurvFamily::MeanH => {
            let value = lambda.iter().sum::<f64>() / nf;
            out.gradient[..n].fill(1.0 / nf);
            if let Some(h) = out.hessian.as_deref_mut() {
                h[..n * n].fill(0.0);
            }
            value
        }
        CurvFamily::NormOfA => {
            let s2: f64 = lambda.iter().map(|x| x * x).sum();
            let s = s2.sqrt();
            let rn = nf.sqrt();
            let value = s / rn;
            for i in 0..n {
                out.gradient[i] = lambda[i] / (s * rn);
            }
            if let Some(h) = out.hessian.as_deref_mut() {
                let c = 1.0 / (s * rn);
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * n + j] = c * (delta - lambda[i] * lambda[j] / s2);
                    }
                }
            }
            value
        }
        CurvFamily::GammaK { k } => {
            let k = k as usize;
            let p = 1.0 / k as f64;
            let mut hk: Buf = [0.0; MAX_DIM + 1];
            hsym_into(lambda, k, &mut hk);
            let ones = [1.0; MAX_DIM];
            let mut hk1: Buf = [0.0; MAX_DIM + 1];
            hsym_into(&ones[..n], k, &mut hk1);
            let c = hk1[k];
            let u = hk[k] / c;
            let value = u.powf(p);
            // d h_k / d lambda_i = h_{k-1} of the multiset with lambda_i
            // repeated once more.
            let mut ext: Buf = [0.0; MAX_DIM + 1];
            let mut grad_hk = [0.0_f64; MAX_DIM];
            if k >= 1 {
                for i in 0..n {
                    hsym_extend(&hk, lambda[i], k - 1, &mut ext);
                    grad_hk[i] = ext[k - 1];
                }
            }
            // f = (h_k / c)^p
            let du = value * p / u; // p * u^(p-1)
            for i in 0..n {
                out.gradient[i] = du * grad_hk[i] / c;
            }
            if let Some(h) = out.hessian.as_deref_mut() {
                let d2u = du * (p - 1.0) / u; // p (p-1) u^(p-2)
                let mut ext2: Buf = [0.0; MAX_DIM + 1];
                for i in 0..n {
                    hsym_extend(&hk, lambda[i], k.max(2) - 2, &mut ext);
                    for j in i..n {
                        let hij = if k >= 2 {
                            hsym_extend(&ext, lambda[j], k - 2, &mut ext2);
                            let mult = if i == j { 2.0 } else { 1.0 };
                            mult * ext2[k - 2]
                        } else {
                            0.0
                        };
                        let ui = grad_hk[i] / c;
                        let uj = grad_hk[j] / c;
                        let v = d2u * ui * uj + du * hij / c;
                        h[i * n + j] = v;
                        h[j * n + i] = v;
                    }
                }
            }
            value
        }
        CurvFamily::QuotientEml { m, l } => {
            let (m, l) = (m as usize, l as usize);
            let p = 1.0 / (m - l) as f64;
            let mut em: Buf = [0.0; MAX_DIM + 1];
            esym_into(lambda, m, &mut em);
            let (a, b) = (em[m], em[l]);
            let ones = [1.0; MAX_DIM];
            let mut e1: Buf = [0.0; MAX_DIM + 1];
            esym_into(&ones[..n], m, &mut e1);
            // u = (E_m / E_m(1)) / (E_l / E_l(1)); both factors are 1 at the
            // all-ones point, bitwise.
            let u = (a * e1[l]) / (b * e1[m]);
            let value = u.powf(p);
            let mut grad_a = [0.0_f64; MAX_DIM];
            let mut grad_b = [0.0_f64; MAX_DIM];
            let mut buf: Buf = [0.0; MAX_DIM + 1];
            for i in 0..n {
                esym_skip_into(lambda, i, m.max(1) - 1, &mut buf);
                grad_a[i] = buf[m - 1];
                grad_b[i] = if l == 0 { 0.0 } else { buf[l - 1] };
            }
            // Log-derivative form: f_i = p f (A_i/A - B_i/B).
            for i in 0..n {
                out.gradient[i] = p * value * (grad_a[i] / a - grad_b[i] / b);
            }
            if let Some(h) = out.hessian.as_deref_mut() {
                for i in 0..n {
                    for j in i..n {
                        let (aij, bij) = if i == j {
                            (0.0, 0.0)
                        } else {
                            esym_skip2_into(lambda, i, j, m.max(2) - 2, &mut buf);
                            let aij = if m >= 2 { buf[m - 2] } else { 0.0 };
                            let bij = if l >= 2 { buf[l - 2] } else { 0.0 };
                            (aij, bij)
                        };
                        // With L_i = A_i/A - B_i/B the gradient is p f L_i,
                        // so f_ij = p f_j L_i + p f dL_i/dlambda_j.
                        let li = grad_a[i] / a - grad_b[i] / b;
                        let lij = aij / a - grad_a[i] * grad_a[j] / (a * a) - bij / b
                            + grad_b[i] * grad_b[j] / (b * b);
                        let v = p * out.gradient[j] * li + p * value * lij;
                        h[i * n + j] = v;
                        h[j * n + i] = v;
                    }
                }
            }
            value
        }
        CurvFamily::PowerMean { r } => {
            let s: f64 = lambda.iter().map(|x| x.powf(r)).sum();
            let u = s / nf;
            let value = u.powf(1.0 / r);
            // f_i = u^(1/r - 1) lambda_i^(r-1) / n: the 1/r from the outer
            // power and the r from the inner one cancel.
            let a = value / u; // u^(1/r - 1)
            for i in 0..n {
                out.gradient[i] = a * lambda[i].powf(r - 1.0) / nf;
            }
            if let Some(h) = out.hessian.as_deref_mut() {
                let b = (1.0 - r) * value / (u * u); // (1 - r) u^(1/r - 2)
                for i in 0..n {
                    let pi = lambda[i].powf(r - 1.0);
                    for j in i..n {
                        let pj = lambda[j].powf(r - 1.0);
                        let mut v = b * pi * pj / (nf * nf);
                        if i == j {
                            v += (r - 1.0) * a * lambda[i].powf(r - 2.0) / nf;
                        }
                        h[i * n + j] = v;
                        h[j * n + i] = v;
                    }
                }
            }
            value
        }
    }
}

/// Value and gradient only, writing into a caller buffer. This is the flow's
/// per-node fast path: no allocation, no Hessian work.
pub(crate) fn eval_value_grad(
    spec: &CurvatureSpec,
    lambda: &[f64],
    gradient: &mut [f64],
) -> Result<f64, CurvError> {
    check_cone(lambda)?;
    if lambda.len() != spec.n() {
        return Err(CurvError::BadDimension { got: lambda.len() });
    }
    let mut out = EvalOut {
        gradient,
        hessian: None,
    };
    Ok(eval_family(spec, lambda, &mut out))
}

/// Full first/second derivative bundle of the normalized curvature function.
pub fn eval(spec: &CurvatureSpec, lambda: &LambdaVector) -> Result<DerivativeBundle, CurvError> {
    eval_slice(spec, lambda.entries())
}

/// [`eval`] on a raw slice (validated, not sorted; symmetric functions do
/// not care about entry order).
pub fn eval_slice(spec: &CurvatureSpec, lambda: &[f64]) -> Result<DerivativeBundle, CurvError> {
    check_cone(lambda)?;
    if lambda.len() != spec.n() {
        return Err(CurvError::BadDimension { got: lambda.len() });
    }
    let n = lambda.len();
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![0.0; n * n];
    let mut out = EvalOut {
        gradient: &mut gradient,
        hessian: Some(&mut hessian),
    };
    let value = eval_family(spec, lambda, &mut out);
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}

/// Derivatives of the flow speed `Phi = f^beta` through the outer power:
/// `Phi_i = beta f^(beta-1) f_i` and
/// `Phi_ij = beta (beta-1) f^(beta-2) f_i f_j + beta f^(beta-1) f_ij`.
pub fn eval_phi(
    spec: &CurvatureSpec,
    lambda: &LambdaVector,
    beta: f64,
) -> Result<DerivativeBundle, CurvError> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(CurvError::BetaBelowOne(beta));
    }
    let f = eval(spec, lambda)?;
    let n = f.n();
    let value = f.value.powf(beta);
    let d1 = beta * f.value.powf(beta - 1.0);
    let d2 = beta * (beta - 1.0) * f.value.powf(beta - 2.0);
    let gradient: Vec<f64> = f.gradient.iter().map(|g| d1 * g).collect();
    let mut hessian = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            hessian[i * n + j] = d2 * f.gradient[i] * f.gradient[j] + d1 * f.hess(i, j);
        }
    }
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}
