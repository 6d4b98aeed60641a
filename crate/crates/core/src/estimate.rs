//! Minimum-distance estimation for the negative binomial and the
//! exponential-polynomial families, with moment and homogeneous-divergence
//! baselines.
//!
//! None of the exponential-polynomial objectives touch the normalizing
//! constant: they only use exponent differences or unnormalized weights.

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::models::exppoly_log_ratio;
use crate::models::log_sum_exp;
use crate::optimize::{minimize_with_fallback, BoxBounds, Minimum, OptimizerConfig};
use crate::sample::Sample;
use crate::sampling::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub params: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub in_bounds: bool,
}

/// `1/n² Σ_{j,ℓ} c_j c_ℓ term(j, ℓ)` over distinct values.
fn pair_sum(sample: &Sample, term: impl Fn(usize, usize) -> f64) -> f64 {
    let cs = sample.counts();
    let mut total = 0.0;
    for j in 0..cs.len() {
        let mut row = 0.0;
        for l in 0..cs.len() {
            row += cs[l] as f64 * term(j, l);
        }
        total += cs[j] as f64 * row;
    }
    let n = sample.len() as f64;
    total / (n * n)
}

/// `S_n^NB(r, q)` in its double-sum form.
pub fn s_nb(sample: &Sample, r: f64, q: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(domain(format!("r must be positive, got {r}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("q must lie in (0, 1), got {q}")));
    }
    let xs: Vec<f64> = sample.distinct().iter().map(|&x| x as f64).collect();
    let a: Vec<f64> = xs.iter().map(|x| 1.0 - (r + x) / (x + 1.0) * (1.0 - q)).collect();
    Ok(pair_sum(sample, |j, l| {
        let (xj, xl) = (xs[j], xs[l]);
        if xj > xl {
            a[j] * (q * (r + xl) - r - 1.0)
        } else if xj == xl {
            a[j] * (q * (r + xl) - r - 1.0) + 1.0
        } else {
            (q * (r + xj) - r + 1.0) * a[l]
        }
    }))
}

fn check_exppoly_inputs(sample: &Sample, theta: &[f64]) -> Result<()> {
    if sample.min() < 1 {
        return Err(domain("exponential-polynomial samples must be >= 1"));
    }
    if theta.len() < 2 {
        return Err(domain("need at least two coefficients"));
    }
    let last = *theta.last().expect("len >= 2");
    if !(last < 0.0) || theta.iter().any(|t| !t.is_finite()) {
        return Err(domain(format!(
            "coefficients must be finite with a negative last entry, got {theta:?}"
        )));
    }
    Ok(())
}

/// `S_n^PE(θ) = Σ_{k>=1} (ê_n(k; θ) − ρ̂_n(k))²`.
///
/// For `d = 3` with `θ₂ = 0` the closed double sum in `E_i` is used; any
/// other `θ` goes through the level-by-level sum.
pub fn s_pe(sample: &Sample, theta: &[f64]) -> Result<f64> {
    check_exppoly_inputs(sample, theta)?;
    if theta.len() == 3 && theta[1] == 0.0 {
        let (t1, t3) = (theta[0], theta[2]);
        let xs: Vec<f64> = sample.distinct().iter().map(|&x| x as f64).collect();
        let e: Vec<f64> = xs
            .iter()
            .map(|x| (t1 + t3 + 3.0 * t3 * x + 3.0 * t3 * x * x).exp())
            .collect();
        return Ok(pair_sum(sample, |j, l| {
            let (xj, xl) = (xs[j], xs[l]);
            let mut v = 0.0;
            if xj >= xl {
                v += (e[j] - 1.0) * (e[l] * xl - xl + 2.0);
            }
            if xj == xl {
                v += 1.0;
            }
            if xj < xl {
                v += (e[j] - 1.0) * (e[l] - 1.0) * xj;
            }
            v
        }));
    }
    Ok(s_pe_by_levels(sample, theta))
}

/// `Σ_{k=1}^{M} (ê_n(k) − ρ̂_n(k))²` with `ê_n` built from suffix sums.
pub(crate) fn s_pe_by_levels(sample: &Sample, theta: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let xs = sample.distinct();
    let cs = sample.counts();
    let weights: Vec<f64> = xs
        .iter()
        .zip(cs)
        .map(|(&x, &c)| -exppoly_log_ratio(theta, x).exp_m1() * c as f64)
        .collect();
    let mut total = 0.0;
    let mut suffix = 0.0;
    let mut idx = xs.len();
    for k in (1..=sample.max()).rev() {
        let mut rho = 0.0;
        while idx > 0 && xs[idx - 1] >= k {
            idx -= 1;
            suffix += weights[idx];
            if xs[idx] == k {
                rho = cs[idx] as f64;
            }
        }
        total += ((suffix - rho) / n).powi(2);
    }
    total
}

/// Moment estimators of the negative binomial parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub r: f64,
    pub q: f64,
    /// `X̄_n >= S_n²`; then `r` is negative or infinite.
    pub underdispersed: bool,
}

/// `q̃ = X̄/S²`, `r̃ = X̄²/(S² − X̄)`, returned even outside the parameter
/// space; `r̃ = +∞` when `X̄ = S²`.
pub fn moment_estimators_nb(sample: &Sample) -> Result<MomentEstimate> {
    let (mean, var) = (sample.mean(), sample.variance());
    if var == 0.0 {
        return Err(Error::DegenerateSample("the sample variance is 0".into()));
    }
    let r = if var == mean {
        f64::INFINITY
    } else {
        mean * mean / (var - mean)
    };
    Ok(MomentEstimate {
        r,
        q: mean / var,
        underdispersed: mean >= var,
    })
}

/// Default search box for `(r, q)`.
pub fn nb_default_bounds() -> BoxBounds {
    BoxBounds::new(vec![1e-4, 1e-4], vec![1e3, 1.0 - 1e-4]).expect("valid bounds")
}

/// Minimizes `objective` from each start, keeping the lowest value.
fn best_of_starts(
    objective: &dyn Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    bounds: &BoxBounds,
    opt: &OptimizerConfig,
) -> Result<EstimateResult> {
    let mut best: Option<Minimum> = None;
    for x0 in starts {
        let m = minimize_with_fallback(objective, x0, bounds, opt)?;
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    let m = best.ok_or_else(|| Error::Config("need at least one start".into()))?;
    Ok(EstimateResult {
        in_bounds: bounds.contains(&m.x),
        converged: m.converged(),
        iterations: m.iterations,
        objective: m.f,
        params: m.x,
    })
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Minimum-distance estimate of `(r, q)` from one random start
/// `r ~ U(1, 3)`, `q ~ U(0.1, 0.9)`.
pub fn estimate_nb(sample: &Sample, opt: &OptimizerConfig, rng: &RandomStream) -> Result<EstimateResult> {
    estimate_nb_with(sample, &nb_default_bounds(), 1, opt, rng)
}

/// As [`estimate_nb`] with a custom box and `n_starts` random starts; start
/// `i` is drawn from `rng.substream(i)`.
pub fn estimate_nb_with(
    sample: &Sample,
    bounds: &BoxBounds,
    n_starts: usize,
    opt: &OptimizerConfig,
    rng: &RandomStream,
) -> Result<EstimateResult> {
    if sample.len() < 2 {
        return Err(domain("estimation needs at least two observations"));
    }
    if bounds.dim() != 2 || bounds.lower()[0] <= 0.0 || bounds.lower()[1] <= 0.0 || bounds.upper()[1] >= 1.0 {
        return Err(Error::Config("the (r, q) box must lie inside (0, ∞) × (0, 1)".into()));
    }
    let starts: Vec<Vec<f64>> = (0..n_starts.max(1))
        .map(|i| {
            let mut g = rng.substream(i as u64).rng();
            let r = uniform(&mut g, 1.0, 3.0);
            let q = uniform(&mut g, 0.1, 0.9);
            vec![r, q]
        })
        .collect();
    let objective = |x: &[f64]| s_nb(sample, x[0], x[1]).unwrap_or(f64::INFINITY);
    best_of_starts(&objective, &starts, bounds, opt)
}

/// Upper bound on the last coefficient during exponential-polynomial fits.
pub const LAST_COEFF_MAX: f64 = -1e-6;
const COEFF_RANGE: f64 = 1e3;

/// Expands free parameters into the full coefficient vector.
struct Layout {
    d: usize,
    /// Zero-based positions and values of pinned coefficients.
    fixed: Vec<(usize, f64)>,
    free: Vec<usize>,
}

impl Layout {
    /// `fixed` holds one-based coefficient indices (`(2, 0.0)` pins `θ₂`).
    fn new(d: usize, fixed: &[(usize, f64)]) -> Result<Self> {
        if d < 2 {
            return Err(Error::Config("the polynomial degree d must be >= 2".into()));
        }
        let mut pinned = Vec::new();
        for &(i, v) in fixed {
            if i == 0 || i > d {
                return Err(Error::Config(format!("cannot fix θ{i} when d = {d}")));
            }
            if i == d && !(v < 0.0) {
                return Err(Error::Config("a fixed last coefficient must be negative".into()));
            }
            pinned.push((i - 1, v));
        }
        let free: Vec<usize> = (0..d).filter(|i| pinned.iter().all(|(p, _)| p != i)).collect();
        if free.is_empty() {
            return Err(Error::Config("every coefficient is fixed".into()));
        }
        Ok(Self { d, fixed: pinned, free })
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.d];
        for &(i, v) in &self.fixed {
            theta[i] = v;
        }
        for (&i, &v) in self.free.iter().zip(x) {
            theta[i] = v;
        }
        theta
    }

    fn bounds(&self) -> BoxBounds {
        let lower = vec![-COEFF_RANGE; self.free.len()];
        let upper = self
            .free
            .iter()
            .map(|&i| if i == self.d - 1 { LAST_COEFF_MAX } else { COEFF_RANGE })
            .collect();
        BoxBounds::new(lower, upper).expect("valid bounds")
    }

    /// `θ_d ~ U(−1, 0)`, every other free coefficient `~ U(−1, 1)`.
    fn starts(&self, n_starts: usize, rng: &RandomStream) -> Vec<Vec<f64>> {
        (0..n_starts.max(1))
            .map(|s| {
                let mut g = rng.substream(s as u64).rng();
                self.free
                    .iter()
                    .map(|&i| {
                        if i == self.d - 1 {
                            uniform(&mut g, -1.0, 0.0).min(LAST_COEFF_MAX)
                        } else {
                            uniform(&mut g, -1.0, 1.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn result(&self, mut r: EstimateResult) -> EstimateResult {
        r.params = self.expand(&r.params);
        r
    }
}

/// Minimum-distance estimate of `θ ∈ ℝ^d` minimizing `S_n^PE`, with
/// optional pinned coefficients given as one-based `(index, value)` pairs.
/// The returned parameter vector has all `d` entries.
pub fn estimate_exppoly(
    sample: &Sample,
    d: usize,
    fixed: &[(usize, f64)],
    opt: &OptimizerConfig,
    rng: &RandomStream,
) -> Result<EstimateResult> {
    estimate_exppoly_with(sample, d, fixed, 1, opt, rng)
}

pub fn estimate_exppoly_with(
    sample: &Sample,
    d: usize,
    fixed: &[(usize, f64)],
    n_starts: usize,
    opt: &OptimizerConfig,
    rng: &RandomStream,
) -> Result<EstimateResult> {
    let layout = Layout::new(d, fixed)?;
    check_fit_sample(sample)?;
    let objective = |x: &[f64]| s_pe(sample, &layout.expand(x)).unwrap_or(f64::INFINITY);
    let r = best_of_starts(&objective, &layout.starts(n_starts, rng), &layout.bounds(), opt)?;
    Ok(layout.result(r))
}

fn check_fit_sample(sample: &Sample) -> Result<()> {
    if sample.len() < 2 {
        return Err(domain("estimation needs at least two observations"));
    }
    if sample.min() < 1 {
        return Err(domain("exponential-polynomial samples must be >= 1"));
    }
    Ok(())
}

/// Constants `(α, α′, γ)` of the homogeneous-divergence estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdConstants {
    pub alpha: f64,
    pub alpha_p: f64,
    pub gamma: f64,
}

impl Default for HdConstants {
    fn default() -> Self {
        Self {
            alpha: 1.1,
            alpha_p: 0.1,
            gamma: 1.0 / 9.0,
        }
    }
}

impl HdConstants {
    /// `ᾱ = (α + γα′)/(1 + γ)`.
    pub fn alpha_bar(&self) -> f64 {
        (self.alpha + self.gamma * self.alpha_p) / (1.0 + self.gamma)
    }

    fn validate(&self) -> Result<()> {
        let HdConstants { alpha, alpha_p, gamma } = *self;
        if alpha_p > 0.0 && alpha > alpha_p && gamma > 0.0 && alpha.is_finite() && gamma.is_finite() {
            Ok(())
        } else {
            Err(domain(format!("need α > α′ > 0 and γ > 0, got {self:?}")))
        }
    }
}

/// Homogeneous-divergence objective with the unnormalized weights given on
/// the log scale, one per distinct sample value. Adding a constant to every
/// `log_q` leaves the value unchanged.
pub fn hd_objective_log_q(sample: &Sample, log_q: &[f64], c: &HdConstants) -> Result<f64> {
    c.validate()?;
    if log_q.len() != sample.distinct().len() {
        return Err(domain("need one log-weight per distinct sample value"));
    }
    let n = sample.len() as f64;
    let log_freq: Vec<f64> = sample.counts().iter().map(|&k| (k as f64 / n).ln()).collect();
    let term = |a: f64| {
        let xs: Vec<f64> = log_freq
            .iter()
            .zip(log_q)
            .map(|(lf, lq)| a * lf + (1.0 - a) * lq)
            .collect();
        log_sum_exp(&xs)
    };
    let g = c.gamma;
    Ok(term(c.alpha) / (1.0 + g) + g / (1.0 + g) * term(c.alpha_p) - term(c.alpha_bar()))
}

/// Homogeneous-divergence objective at `θ`, with
/// `q_θ(k) = exp(θ₁k + … + θ_d k^d)` over the distinct sample values.
pub fn hd_objective(sample: &Sample, theta: &[f64], alpha: f64, alpha_p: f64, gamma: f64) -> Result<f64> {
    if sample.min() < 1 {
        return Err(domain("exponential-polynomial samples must be >= 1"));
    }
    if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
        return Err(domain("coefficients must be finite"));
    }
    let log_q: Vec<f64> = sample
        .distinct()
        .iter()
        .map(|&k| crate::models::exppoly_log_weight(theta, k))
        .collect();
    hd_objective_log_q(sample, &log_q, &HdConstants { alpha, alpha_p, gamma })
}

/// Homogeneous-divergence estimate of `θ`, set up like [`estimate_exppoly`].
pub fn estimate_exppoly_hd(
    sample: &Sample,
    d: usize,
    fixed: &[(usize, f64)],
    opt: &OptimizerConfig,
    constants: &HdConstants,
    rng: &RandomStream,
) -> Result<EstimateResult> {
    estimate_exppoly_hd_with(sample, d, fixed, 1, opt, constants, rng)
}

pub fn estimate_exppoly_hd_with(
    sample: &Sample,
    d: usize,
    fixed: &[(usize, f64)],
    n_starts: usize,
    opt: &OptimizerConfig,
    constants: &HdConstants,
    rng: &RandomStream,
) -> Result<EstimateResult> {
    constants.validate()?;
    let layout = Layout::new(d, fixed)?;
    check_fit_sample(sample)?;
    let HdConstants { alpha, alpha_p, gamma } = *constants;
    let objective = |x: &[f64]| {
        hd_objective(sample, &layout.expand(x), alpha, alpha_p, gamma).unwrap_or(f64::INFINITY)
    };
    let r = best_of_starts(&objective, &layout.starts(n_starts, rng), &layout.bounds(), opt)?;
    Ok(layout.result(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// `Σ_{k >= k0} (ê_n(k) − ρ̂_n(k))²` straight from the definitions.
    fn naive(sample: &Sample, k0: i64, minus_score: impl Fn(i64) -> f64) -> f64 {
        let n = sample.len() as f64;
        (k0..=sample.max() + 1)
            .map(|k| {
                let e: f64 = sample
                    .values()
                    .iter()
                    .filter(|&&x| x >= k)
                    .map(|&x| minus_score(x))
                    .sum::<f64>()
                    / n;
                let r = sample.values().iter().filter(|&&x| x == k).count() as f64 / n;
                (e - r).powi(2)
            })
            .sum()
    }

    #[test]
    fn single_zero_observation() {
        let s = Sample::new(vec![0]).unwrap();
        for q in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(s_nb(&s, 1.0, q).unwrap(), (q - 1.0).powi(2), epsilon = 1e-15);
        }
        assert!(s_nb(&s, 0.0, 0.5).is_err());
        assert!(s_nb(&s, 1.0, 1.0).is_err());
    }

    #[test]
    fn single_one_observation() {
        let s = Sample::new(vec![1]).unwrap();
        let (t1, t3): (f64, f64) = (0.3, -0.4);
        let e1 = (t1 + 7.0 * t3).exp();
        assert_abs_diff_eq!(s_pe(&s, &[t1, 0.0, t3]).unwrap(), e1 * e1, epsilon = 1e-14);
        assert!(s_pe(&Sample::new(vec![0, 1]).unwrap(), &[t1, 0.0, t3]).is_err());
        assert!(s_pe(&s, &[t1, 0.0, 0.1]).is_err());
    }

    #[test]
    fn moment_estimators() {
        // mean 2, variance 4
        let s = Sample::new(vec![0, 0, 4, 4]).unwrap();
        let m = moment_estimators_nb(&s).unwrap();
        assert_abs_diff_eq!(m.q, 0.5);
        assert_abs_diff_eq!(m.r, 2.0);
        assert!(!m.underdispersed);

        // mean 3, variance 2
        let s = Sample::new(vec![1, 1, 5, 5, 3, 3, 3, 3]).unwrap();
        let m = moment_estimators_nb(&s).unwrap();
        assert_abs_diff_eq!(m.r, -9.0, epsilon = 1e-12);
        assert!(m.underdispersed);

        // mean 1, variance 1
        let s = Sample::new(vec![0, 2]).unwrap();
        let m = moment_estimators_nb(&s).unwrap();
        assert_eq!(m.r, f64::INFINITY);
        assert!(m.underdispersed);

        assert!(matches!(
            moment_estimators_nb(&Sample::new(vec![3, 3]).unwrap()),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn hd_default_constants() {
        let c = HdConstants::default();
        assert_abs_diff_eq!(c.alpha_bar(), 1.0, epsilon = 1e-15);
        assert!(hd_objective(&Sample::new(vec![1, 2]).unwrap(), &[0.1, -0.1], 1.0, 1.1, 0.5).is_err());
    }

    #[test]
    fn hd_theta1_shift_changes_objective_when_values_differ() {
        // q_θ(k) gains a factor e^{δk}, which is not uniform across k.
        let s = Sample::new(vec![1, 1, 2, 3, 3, 3]).unwrap();
        let c = HdConstants::default();
        let a = hd_objective(&s, &[0.2, 0.0, -0.3], c.alpha, c.alpha_p, c.gamma).unwrap();
        let b = hd_objective(&s, &[0.7, 0.0, -0.3], c.alpha, c.alpha_p, c.gamma).unwrap();
        assert!((a - b).abs() > 1e-6);
        // With a single distinct value the shift is a uniform rescaling.
        let one = Sample::new(vec![2, 2, 2]).unwrap();
        let a = hd_objective(&one, &[0.2, -0.3], c.alpha, c.alpha_p, c.gamma).unwrap();
        let b = hd_objective(&one, &[0.9, -0.3], c.alpha, c.alpha_p, c.gamma).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn fixed_and_general_paths_agree() {
        let s = Sample::new(vec![1, 2, 2, 3, 1, 1, 4, 2, 2, 3, 1, 2]).unwrap();
        let opt = OptimizerConfig::default();
        let rng = RandomStream::new(3);
        let pinned = estimate_exppoly(&s, 3, &[(2, 0.0)], &opt, &rng).unwrap();
        // Same objective, forced through the level-by-level evaluation.
        let layout = Layout::new(3, &[(2, 0.0)]).unwrap();
        let general = |x: &[f64]| s_pe_by_levels(&s, &layout.expand(x));
        let m = minimize_with_fallback(general, &layout.starts(1, &rng)[0], &layout.bounds(), &opt).unwrap();
        assert!((pinned.params[0] - m.x[0]).abs() < 1e-4, "{pinned:?} vs {m:?}");
        assert!((pinned.params[2] - m.x[1]).abs() < 1e-4);
        assert_eq!(pinned.params[1], 0.0);
    }

    #[test]
    fn layout_validation() {
        assert!(Layout::new(1, &[]).is_err());
        assert!(Layout::new(3, &[(4, 0.0)]).is_err());
        assert!(Layout::new(3, &[(3, 0.5)]).is_err());
        assert!(Layout::new(2, &[(1, 0.0), (2, -1.0)]).is_err());
    }

    #[test]
    fn underdispersed_fixture() {
        let s = Sample::new([2, 2, 2, 3].repeat(5)).unwrap();
        let fit = estimate_nb(&s, &OptimizerConfig::default(), &RandomStream::new(1)).unwrap();
        assert!(fit.in_bounds);
        assert!(fit.params[0] > 0.0 && fit.params[1] > 0.0 && fit.params[1] < 1.0);
        let m = moment_estimators_nb(&s).unwrap();
        assert!(m.underdispersed && (m.r < 0.0 || m.q > 1.0));
    }

    proptest! {
        #[test]
        fn s_nb_matches_naive(
            values in prop::collection::vec(0i64..=20, 1..=30),
            r in 0.05f64..20.0,
            q in 0.01f64..0.99,
        ) {
            let s = Sample::new(values).unwrap();
            let oracle = naive(&s, 0, |x| 1.0 - (r + x as f64) / (x as f64 + 1.0) * (1.0 - q));
            prop_assert!((s_nb(&s, r, q).unwrap() - oracle).abs() < 1e-10);
        }

        #[test]
        fn s_pe_matches_naive(
            values in prop::collection::vec(1i64..=8, 1..=30),
            t1 in -1.5f64..1.5,
            t3 in -1.0f64..-0.01,
        ) {
            let s = Sample::new(values).unwrap();
            let theta = [t1, 0.0, t3];
            let oracle = naive(&s, 1, |x| 1.0 - exppoly_log_ratio(&theta, x).exp());
            let v = s_pe(&s, &theta).unwrap();
            prop_assert!((v - oracle).abs() < 1e-10 * oracle.max(1.0), "{} vs {}", v, oracle);
            prop_assert!((s_pe_by_levels(&s, &theta) - oracle).abs() < 1e-10 * oracle.max(1.0));
        }

        #[test]
        fn hd_invariant_under_uniform_rescaling(
            values in prop::collection::vec(1i64..=6, 1..=30),
            log_c in -20.0f64..20.0,
            t1 in -1.0f64..1.0,
            t3 in -1.0f64..-0.01,
        ) {
            let s = Sample::new(values).unwrap();
            let c = HdConstants::default();
            let lq: Vec<f64> = s.distinct().iter().map(|&k| t1 * k as f64 + t3 * (k as f64).powi(3)).collect();
            let shifted: Vec<f64> = lq.iter().map(|v| v + log_c).collect();
            let a = hd_objective_log_q(&s, &lq, &c).unwrap();
            let b = hd_objective_log_q(&s, &shifted, &c).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn objectives_nonnegative(
            values in prop::collection::vec(1i64..=10, 1..=30),
            r in 0.1f64..10.0,
            q in 0.05f64..0.95,
            t1 in -1.0f64..1.0,
            t3 in -1.0f64..-0.01,
        ) {
            let s = Sample::new(values).unwrap();
            prop_assert!(s_nb(&s, r, q).unwrap() >= 0.0);
            prop_assert!(s_pe(&s, &[t1, 0.0, t3]).unwrap() >= -1e-15);
        }
    }
}
