//! Both sides of the characterizing identities, evaluated for a model and a
//! candidate law.
//!
//! Each `*_residual` function checks a model against itself; the matching
//! `*_residual_for` variant takes an arbitrary [`Law`], conditions it on the
//! model support, and compares the law's own transform (left-hand side) with
//! the score-weighted expectation under that law (right-hand side). The
//! residual vanishes exactly when the law equals the model.
//!
//! All infinite sums are accumulated from the largest index downwards.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::models::{tail_over_pmf, DiscreteModel};
use crate::sample::Sample;

/// `ρ̂_n(k)`: fraction of observations equal to `k`.
pub fn empirical_pmf(sample: &Sample, k: i64) -> f64 {
    sample.count_of(k) as f64 / sample.len() as f64
}

/// `ê_n(k) = n⁻¹ Σ_j −(Δ⁺p/p)(X_j)·1{X_j >= k}` for the given model.
pub fn empirical_expectation_side(sample: &Sample, model: &DiscreteModel, k: i64) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &c) in sample.distinct().iter().zip(sample.counts()) {
        let s = model.score_forward(x)?;
        if x >= k {
            acc -= s * c as f64;
        }
    }
    Ok(acc / sample.len() as f64)
}

/// A probability law tabulated on `lower, lower+1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Law {
    lower: i64,
    probs: Vec<f64>,
}

impl Law {
    pub fn new(lower: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(domain("a law needs finite nonnegative weights"));
        }
        Ok(Self { lower, probs })
    }

    /// The model's own pmf over its (truncated) support.
    pub fn from_model(model: &DiscreteModel) -> Self {
        Self {
            lower: model.support().lower(),
            probs: model.pmf_table(),
        }
    }

    /// Tabulates `pmf` on `lower..=upper`.
    pub fn from_fn(lower: i64, upper: i64, pmf: impl Fn(i64) -> f64) -> Result<Self> {
        Self::new(lower, (lower..=upper).map(pmf).collect())
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.lower + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k < self.lower {
            return 0.0;
        }
        self.probs.get((k - self.lower) as usize).copied().unwrap_or(0.0)
    }

    /// The law conditioned on `model`'s support and renormalized.
    fn condition_on(&self, model: &DiscreteModel) -> Result<Law> {
        let support = model.support();
        let lo = self.lower.max(support.lower());
        let hi = match support.upper() {
            Some(u) => self.upper().min(u),
            None => self.upper(),
        };
        if hi < lo {
            return Err(domain("the law puts no mass on the model support"));
        }
        let probs: Vec<f64> = (lo..=hi).map(|k| self.prob(k)).collect();
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(domain("the law puts no mass on the model support"));
        }
        Law::new(support.lower(), {
            let mut v = vec![0.0; (lo - support.lower()) as usize];
            v.extend(probs.iter().map(|p| p / total));
            v
        })
    }
}

/// Pointwise comparison of the two sides of an identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResidual<V = f64> {
    /// Evaluation points: integers `k` or grid values `t`, `s`.
    pub points: Vec<f64>,
    pub lhs: Vec<V>,
    pub rhs: Vec<V>,
    /// `max |lhs − rhs|`.
    pub sup_abs: f64,
    /// `Σ |lhs − rhs|²`.
    pub l2: f64,
}

impl<V: Copy> IdentityResidual<V> {
    fn new(points: Vec<f64>, lhs: Vec<V>, rhs: Vec<V>, gap: impl Fn(V, V) -> f64) -> Self {
        let diffs: Vec<f64> = lhs.iter().zip(&rhs).map(|(&a, &b)| gap(a, b)).collect();
        Self {
            points,
            sup_abs: diffs.iter().copied().fold(0.0, f64::max),
            l2: diffs.iter().map(|d| d * d).sum(),
            lhs,
            rhs,
        }
    }
}

fn real(points: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>) -> IdentityResidual {
    IdentityResidual::new(points, lhs, rhs, |a, b| (a - b).abs())
}

/// `(ℓ, −score(ℓ)·w(ℓ))` over the law's range, with the score taken from the
/// model.
fn weighted_scores(model: &DiscreteModel, law: &Law) -> Result<Vec<(i64, f64, f64)>> {
    (law.lower()..=law.upper())
        .map(|l| Ok((l, -model.score_forward(l)?, law.prob(l))))
        .collect()
}

fn clamp_kmax(model: &DiscreteModel, law: &Law, k_max: i64) -> Result<i64> {
    let lower = model.support().lower();
    if k_max < lower {
        return Err(domain(format!("k_max {k_max} is below the support lower bound {lower}")));
    }
    Ok(match model.support().upper() {
        Some(u) => k_max.min(u),
        None => k_max.min(law.upper().max(lower)),
    })
}

/// Probability mass identity for the model's own law, `k = L..=k_max`.
pub fn pmf_identity_residual(model: &DiscreteModel, k_max: i64) -> Result<IdentityResidual> {
    pmf_identity_residual_for(model, &Law::from_model(model), k_max)
}

pub fn pmf_identity_residual_for(model: &DiscreteModel, law: &Law, k_max: i64) -> Result<IdentityResidual> {
    let law = law.condition_on(model)?;
    let k_max = clamp_kmax(model, &law, k_max)?;
    let terms = weighted_scores(model, &law)?;
    // suffix[i] = Σ_{ℓ >= lower + i} (−score)·w
    let mut suffix = vec![0.0; terms.len() + 1];
    for (i, &(_, s, w)) in terms.iter().enumerate().rev() {
        suffix[i] = suffix[i + 1] + s * w;
    }
    let lower = law.lower();
    let ks: Vec<i64> = (lower..=k_max).collect();
    let lhs = ks.iter().map(|&k| law.prob(k)).collect();
    let rhs = ks
        .iter()
        .map(|&k| suffix.get((k - lower) as usize).copied().unwrap_or(0.0))
        .collect();
    Ok(real(ks.iter().map(|&k| k as f64).collect(), lhs, rhs))
}

/// Distribution function identity, `k = L..=k_max`.
pub fn cdf_identity_residual(model: &DiscreteModel, k_max: i64) -> Result<IdentityResidual> {
    cdf_identity_residual_for(model, &Law::from_model(model), k_max)
}

pub fn cdf_identity_residual_for(model: &DiscreteModel, law: &Law, k_max: i64) -> Result<IdentityResidual> {
    let law = law.condition_on(model)?;
    let k_max = clamp_kmax(model, &law, k_max)?;
    let lower = law.lower();
    let terms = weighted_scores(model, &law)?;
    let ks: Vec<i64> = (lower..=k_max).collect();
    let mut lhs = Vec::with_capacity(ks.len());
    let mut rhs = Vec::with_capacity(ks.len());
    for &k in &ks {
        let mut acc = 0.0;
        for &(l, s, w) in terms.iter().rev() {
            acc += s * (l.min(k) - lower + 1) as f64 * w;
        }
        rhs.push(acc);
        lhs.push((lower..=k).rev().map(|j| law.prob(j)).sum());
    }
    Ok(real(ks.iter().map(|&k| k as f64).collect(), lhs, rhs))
}

/// Below this `|1 − e^{it}|` the geometric sum is accumulated term by term.
const CF_SINGULAR: f64 = 1e-3;

/// Characteristic function identity on the grid `t_grid`.
pub fn cf_identity_residual(model: &DiscreteModel, t_grid: &[f64]) -> Result<IdentityResidual<Complex64>> {
    cf_identity_residual_for(model, &Law::from_model(model), t_grid)
}

pub fn cf_identity_residual_for(
    model: &DiscreteModel,
    law: &Law,
    t_grid: &[f64],
) -> Result<IdentityResidual<Complex64>> {
    let law = law.condition_on(model)?;
    let lower = law.lower();
    let terms = weighted_scores(model, &law)?;
    let mut lhs = Vec::with_capacity(t_grid.len());
    let mut rhs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let e = |k: i64| Complex64::from_polar(1.0, t * k as f64);
        let denom = Complex64::new(1.0, 0.0) - e(1);
        let geometric: Vec<Complex64> = if denom.norm() < CF_SINGULAR {
            // Σ_{ℓ=L}^{x} e^{itℓ} by partial sums.
            let mut acc = Complex64::new(0.0, 0.0);
            terms
                .iter()
                .map(|&(x, _, _)| {
                    acc += e(x);
                    acc
                })
                .collect()
        } else {
            terms.iter().map(|&(x, _, _)| (e(lower) - e(x + 1)) / denom).collect()
        };
        let mut left = Complex64::new(0.0, 0.0);
        let mut right = Complex64::new(0.0, 0.0);
        for (&(x, s, w), g) in terms.iter().zip(&geometric).rev() {
            left += e(x) * w;
            right += g * s * w;
        }
        lhs.push(left);
        rhs.push(right);
    }
    Ok(IdentityResidual::new(t_grid.to_vec(), lhs, rhs, |a, b| (a - b).norm()))
}

/// Generating function identity on `s_grid ⊂ [0, 1)`; requires support `ℕ₀`.
pub fn pgf_identity_residual(model: &DiscreteModel, s_grid: &[f64]) -> Result<IdentityResidual> {
    pgf_identity_residual_for(model, &Law::from_model(model), s_grid)
}

pub fn pgf_identity_residual_for(model: &DiscreteModel, law: &Law, s_grid: &[f64]) -> Result<IdentityResidual> {
    let support = model.support();
    if support.lower() != 0 || support.is_finite() {
        return Err(Error::Unsupported(format!(
            "the generating function identity needs support {{0, 1, ...}}, not {support}"
        )));
    }
    if let Some(s) = s_grid.iter().find(|s| !(0.0..1.0).contains(*s)) {
        return Err(domain(format!("grid point {s} is outside [0, 1)")));
    }
    let law = law.condition_on(model)?;
    let terms = weighted_scores(model, &law)?;
    let mut lhs = Vec::with_capacity(s_grid.len());
    let mut rhs = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut left = 0.0;
        let mut right = 0.0;
        for &(x, score, w) in terms.iter().rev() {
            left += s.powi(x as i32) * w;
            right += score * ((1.0 - s.powi(x as i32 + 1)) / (1.0 - s)) * w;
        }
        lhs.push(left);
        rhs.push(right);
    }
    Ok(real(s_grid.to_vec(), lhs, rhs))
}

/// Backward-difference identity over the whole (finite) support.
pub fn backward_identity_residual(model: &DiscreteModel) -> Result<IdentityResidual> {
    backward_identity_residual_for(model, &Law::from_model(model))
}

pub fn backward_identity_residual_for(model: &DiscreteModel, law: &Law) -> Result<IdentityResidual> {
    let Some(upper) = model.support().upper() else {
        return Err(Error::Unsupported(
            "the backward identity needs a finite support".into(),
        ));
    };
    let law = law.condition_on(model)?;
    let lower = law.lower();
    let ks: Vec<i64> = (lower..=upper).collect();
    let mut acc = 0.0;
    let mut rhs = Vec::with_capacity(ks.len());
    for &k in &ks {
        acc += model.score_backward(k)? * law.prob(k);
        rhs.push(acc);
    }
    let lhs = ks.iter().map(|&k| law.prob(k)).collect();
    Ok(real(ks.iter().map(|&k| k as f64).collect(), lhs, rhs))
}

/// `Σ_k (Δ⁺f(k) + (Δ⁺p(k)/p(k))·f(k+1))·w(k)` over `L..=truncation_upper()`
/// of the model.
///
/// The summand is evaluated as `(1 + score)·f(k+1) − f(k)`, so `f(R+1)` is
/// multiplied by zero on a finite support.
pub fn stein_operator_expectation(
    model: &DiscreteModel,
    f: &dyn Fn(i64) -> f64,
    weights: &dyn Fn(i64) -> f64,
) -> Result<f64> {
    let lower = model.support().lower();
    let upper = model.truncation_upper();
    let mut acc = 0.0;
    for k in (lower..=upper).rev() {
        let w = weights(k);
        if w == 0.0 {
            continue;
        }
        let ratio = 1.0 + model.score_forward(k)?;
        let next = if ratio == 0.0 { 0.0 } else { ratio * f(k + 1) };
        acc += (next - f(k)) * w;
    }
    Ok(acc)
}

/// Test function solving the Stein equation for `1{· ≤ m} − P(Z ≤ m)`:
/// `f_m(k) = p(k)⁻¹ Σ_{ℓ=L}^{k−1} (1{ℓ ≤ m} − P(Z ≤ m)) p(ℓ)`, with
/// `f_m(L) = 0` and `f_m = 0` off the support.
///
/// Beyond `m + 1` the equivalent form `P(Z ≤ m)·P(Z ≥ k)/p(k)` is used,
/// with the tail ratio built from scores.
pub fn make_fm(model: &DiscreteModel, m: i64) -> Result<Box<dyn Fn(i64) -> f64 + Send + Sync>> {
    let lower = model.support().lower();
    if m < lower {
        return Err(domain(format!("m = {m} is below the support lower bound {lower}")));
    }
    let model = model.clone();
    let cdf_m = model.cdf(m);
    Ok(Box::new(move |k: i64| {
        if k <= lower || !model.support().contains(k) {
            0.0
        } else if k <= m + 1 {
            (1.0 - cdf_m) * model.cdf(k - 1) / model.pmf(k)
        } else {
            cdf_m * tail_over_pmf(&model, k)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empirical_sides() {
        let s = Sample::new(vec![0, 0, 1]).unwrap();
        assert_abs_diff_eq!(empirical_pmf(&s, 0), 2.0 / 3.0);
        let one = Sample::new(vec![5]).unwrap();
        assert_eq!(empirical_pmf(&one, 4), 0.0);

        let s = Sample::new(vec![0, 1]).unwrap();
        let po = DiscreteModel::poisson(1.0).unwrap();
        assert_abs_diff_eq!(empirical_expectation_side(&s, &po, 1).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(empirical_expectation_side(&s, &po, 2).unwrap(), 0.0);

        let u = DiscreteModel::uniform(3).unwrap();
        assert!(empirical_expectation_side(&s, &u, 1).is_err());
    }

    #[test]
    fn forward_identities_hold() {
        let po = DiscreteModel::poisson(2.0).unwrap();
        assert!(pmf_identity_residual(&po, 40).unwrap().sup_abs < 1e-10);
        let nb = DiscreteModel::neg_binomial(3.0, 0.4).unwrap();
        assert!(pmf_identity_residual(&nb, 60).unwrap().sup_abs < 1e-10);
        let po1 = DiscreteModel::poisson(1.0).unwrap();
        assert!(cdf_identity_residual(&po1, 30).unwrap().sup_abs < 1e-10);
    }

    #[test]
    fn cdf_at_upper_end_is_total_mass() {
        let b = DiscreteModel::binomial(5, 0.5).unwrap();
        let r = cdf_identity_residual(&b, 5).unwrap();
        assert!(r.sup_abs < 1e-12);
        assert_abs_diff_eq!(*r.lhs.last().unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*r.rhs.last().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cf_identity() {
        let po = DiscreteModel::poisson(1.0).unwrap();
        let r = cf_identity_residual(&po, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert!(r.sup_abs < 1e-10);
        assert_abs_diff_eq!(r.lhs[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rhs[0].re, 1.0, epsilon = 1e-12);

        // Uniform on {1,2,3} at t = π: φ(π) = (−1 + 1 − 1)/3 = −1/3.
        let u = DiscreteModel::uniform(3).unwrap();
        let r = cf_identity_residual(&u, &[std::f64::consts::PI]).unwrap();
        assert!(r.sup_abs < 1e-12);
        assert_abs_diff_eq!(r.lhs[0].re, -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn pgf_identity() {
        let po = DiscreteModel::poisson(2.0).unwrap();
        let r = pgf_identity_residual(&po, &[0.5]).unwrap();
        assert_abs_diff_eq!(r.lhs[0], (-1.0f64).exp(), epsilon = 1e-12);
        assert!(r.sup_abs < 1e-10);
        let nb = DiscreteModel::neg_binomial(2.0, 0.5).unwrap();
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert!(pgf_identity_residual(&nb, &grid).unwrap().sup_abs < 1e-10);
        assert!(matches!(
            pgf_identity_residual(&DiscreteModel::binomial(3, 0.5).unwrap(), &[0.5]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn pgf_at_zero_is_pmf_at_zero() {
        let nb = DiscreteModel::neg_binomial(2.5, 0.3).unwrap();
        let pmf = pmf_identity_residual(&nb, 0).unwrap();
        let pgf = pgf_identity_residual(&nb, &[0.0]).unwrap();
        assert_eq!(pgf.lhs[0], pmf.lhs[0]);
        assert_eq!(pgf.rhs[0], pmf.rhs[0]);
    }

    #[test]
    fn backward_identity() {
        let b = DiscreteModel::binomial(4, 0.3).unwrap();
        assert!(backward_identity_residual(&b).unwrap().sup_abs < 1e-12);
        let u = DiscreteModel::uniform(5).unwrap();
        let r = backward_identity_residual(&u).unwrap();
        for v in &r.rhs {
            assert_abs_diff_eq!(*v, 0.2, epsilon = 1e-15);
        }
        assert!(matches!(
            backward_identity_residual(&DiscreteModel::poisson(1.0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn discriminates_other_laws() {
        let po = DiscreteModel::poisson(2.0).unwrap();
        let unif = Law::from_fn(1, 6, |_| 1.0 / 6.0).unwrap();
        let r = pmf_identity_residual_for(&po, &unif, 10).unwrap();
        assert!(r.sup_abs > 0.05, "{}", r.sup_abs);
    }

    #[test]
    fn fm_values() {
        let u = DiscreteModel::uniform(3).unwrap();
        let f = make_fm(&u, 1).unwrap();
        assert_eq!(f(1), 0.0);
        assert_abs_diff_eq!(f(2), 2.0 / 3.0, epsilon = 1e-15);
        let po = DiscreteModel::poisson(1.0).unwrap();
        assert_eq!(make_fm(&po, 3).unwrap()(0), 0.0);
        assert!(make_fm(&u, 0).is_err());
    }

    #[test]
    fn stein_expectations() {
        let po = DiscreteModel::poisson(1.0).unwrap();
        let f3 = make_fm(&po, 3).unwrap();
        let own = |k: i64| po.pmf(k);
        assert!(stein_operator_expectation(&po, &*f3, &own).unwrap().abs() < 1e-10);

        let one = |_: i64| 1.0;
        assert_abs_diff_eq!(
            stein_operator_expectation(&po, &one, &own).unwrap(),
            -(-1.0f64).exp(),
            epsilon = 1e-10
        );

        let unif = |k: i64| if (1..=6).contains(&k) { 1.0 / 6.0 } else { 0.0 };
        let got = stein_operator_expectation(&po, &*f3, &unif).unwrap();
        assert_abs_diff_eq!(got, 0.5 - po.cdf(3), epsilon = 1e-10);
    }
}
