//! Poisson goodness-of-fit: the `T_n^Po` statistic, seven competitors and
//! the parametric bootstrap used to calibrate all of them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::sampling::{AltDistSpec, PoissonSampler, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GofStatistic {
    TnPo,
    BH,
    SR,
    RU,
    K1,
    K2,
    KS,
    CM,
}

impl GofStatistic {
    pub const ALL: [GofStatistic; 8] = [
        Self::TnPo,
        Self::BH,
        Self::SR,
        Self::RU,
        Self::K1,
        Self::K2,
        Self::KS,
        Self::CM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TnPo => "tnpo",
            Self::BH => "bh",
            Self::SR => "sr",
            Self::RU => "ru",
            Self::K1 => "k1",
            Self::K2 => "k2",
            Self::KS => "ks",
            Self::CM => "cm",
        }
    }

    /// Value of the statistic on `sample`.
    pub fn evaluate(self, sample: &Sample) -> Result<f64> {
        match self {
            Self::TnPo => Ok(tn_po(sample)),
            other => competitor(other, sample),
        }
    }

    /// As [`GofStatistic::evaluate`], but an all-zero sample gives RU its
    /// continuous limit 0 (the integrand vanishes identically). Bootstrap
    /// replicates go through this path.
    fn evaluate_replicate(self, sample: &Sample) -> Result<f64> {
        if self == Self::RU && sample.max() == 0 {
            return Ok(0.0);
        }
        self.evaluate(sample)
    }
}

impl fmt::Display for GofStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GofStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse {
                spec: s.to_string(),
                reason: "expected one of tnpo, bh, sr, ru, k1, k2, ks, cm".into(),
            })
    }
}

/// `T_n^Po` through its double-sum representation, evaluated over distinct
/// values with multiplicities.
pub fn tn_po(sample: &Sample) -> f64 {
    let lambda = sample.mean();
    let xs = sample.distinct();
    let cs = sample.counts();
    let a: Vec<f64> = xs.iter().map(|&x| 1.0 - lambda / (x as f64 + 1.0)).collect();
    let mut total = 0.0;
    for (j, &xj) in xs.iter().enumerate() {
        let mut row = 0.0;
        for (l, &xl) in xs.iter().enumerate() {
            let term = if xj > xl {
                a[j] * (xl as f64 - 1.0 - lambda)
            } else if xj == xl {
                a[j] * (xl as f64 - 1.0 - lambda) + 1.0
            } else {
                (xj as f64 + 1.0 - lambda) * a[l]
            };
            row += cs[l] as f64 * term;
        }
        total += cs[j] as f64 * row;
    }
    let n = sample.len() as f64;
    total / (n * n)
}

/// Poisson pmf and cdf tables on `0..=upper`.
fn poisson_tables(lambda: f64, upper: i64) -> (Vec<f64>, Vec<f64>) {
    let mut pmf = Vec::with_capacity(upper as usize + 1);
    let mut p = (-lambda).exp();
    for j in 0..=upper {
        if j > 0 {
            p *= lambda / j as f64;
        }
        pmf.push(p);
    }
    let mut acc = 0.0;
    let cdf = pmf
        .iter()
        .map(|p| {
            acc += p;
            acc.min(1.0)
        })
        .collect();
    (pmf, cdf)
}

/// Empirical distribution function on `0..=upper`.
fn empirical_cdf(sample: &Sample, upper: i64) -> Vec<f64> {
    let n = sample.len() as f64;
    let mut out = Vec::with_capacity(upper as usize + 1);
    let mut idx = 0;
    let mut acc = 0usize;
    for j in 0..=upper {
        while idx < sample.distinct().len() && sample.distinct()[idx] <= j {
            acc += sample.counts()[idx];
            idx += 1;
        }
        out.push(acc as f64 / n);
    }
    out
}

/// `∫₀¹ t^x e^{λ(t−1)} dt` through its alternating closed form, or through
/// the positive series `e^{−λ} Σ_m λ^m / (m! (x+m+1))` when the closed form
/// cancels catastrophically.
pub(crate) fn ru_integral(x: i64, lambda: f64) -> f64 {
    let ln_l = lambda.ln();
    let ln_xfact = libm::lgamma(x as f64 + 1.0);
    let mut sum = 0.0;
    let mut max_term = 0.0_f64;
    for j in 1..=x {
        let mag = (ln_xfact - libm::lgamma((x - j + 2) as f64) - j as f64 * ln_l).exp();
        let signed = if j % 2 == 1 { mag } else { -mag };
        max_term = max_term.max(mag);
        sum += signed;
    }
    let last = (ln_xfact - (x + 1) as f64 * ln_l).exp() * -(-lambda).exp_m1();
    max_term = max_term.max(last);
    sum += if x % 2 == 0 { last } else { -last };
    if sum > 0.0 && sum.is_finite() && max_term / sum < 1e5 {
        return sum;
    }
    let mut term = 1.0_f64; // λ^m / m!
    let mut acc = 0.0;
    let mut m = 0_i64;
    loop {
        let add = term / (x + m + 1) as f64;
        acc += add;
        m += 1;
        if (add < 1e-17 * acc && m as f64 > lambda) || m > 100_000 {
            break;
        }
        term *= lambda / m as f64;
    }
    (-lambda).exp() * acc
}

/// Mean-distance estimate of the distribution function on `0..=upper`:
/// `M̂(0) = F̂_n(0)` and, for `j >= 1`,
/// `M̂(j) = (n⁻¹Σ|j − X_i| + j − λ̂ + 2λ̂ F̂_n(j−1)) / (2j)`, clipped to `[0, 1]`.
fn mean_distance_cdf(sample: &Sample, fhat: &[f64]) -> Vec<f64> {
    let n = sample.len() as f64;
    let lambda = sample.mean();
    fhat.iter()
        .enumerate()
        .map(|(j, &f)| {
            if j == 0 {
                return f;
            }
            let jf = j as f64;
            let mean_dist: f64 = sample
                .distinct()
                .iter()
                .zip(sample.counts())
                .map(|(&x, &c)| (jf - x as f64).abs() * c as f64)
                .sum::<f64>()
                / n;
            ((mean_dist + jf - lambda + 2.0 * lambda * fhat[j - 1]) / (2.0 * jf)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Upper summation bound for SR: beyond the sample maximum and the
/// `1 − 1e-10` quantile of `Po(λ̂)`.
fn sr_upper(sample: &Sample) -> i64 {
    let lambda = sample.mean();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut q = 0_i64;
    while cdf < 1.0 - 1e-10 && q < 100_000 {
        q += 1;
        p *= lambda / q as f64;
        cdf += p;
    }
    sample.max().max(q) + 1
}

/// Value of a competitor statistic. `TnPo` is accepted as well.
pub fn competitor(statistic: GofStatistic, sample: &Sample) -> Result<f64> {
    let n = sample.len() as f64;
    let lambda = sample.mean();
    let m = sample.max();
    let xs = sample.distinct();
    let cs = sample.counts();
    Ok(match statistic {
        GofStatistic::TnPo => tn_po(sample),
        GofStatistic::BH => {
            let mut double = 0.0;
            for (&xi, &ci) in xs.iter().zip(cs) {
                for (&xj, &cj) in xs.iter().zip(cs) {
                    let (a, b) = (xi as f64, xj as f64);
                    let cross = if xi * xj == 0 { 0.0 } else { a * b / (a + b - 1.0) };
                    double += (ci * cj) as f64 * (lambda * lambda / (a + b + 1.0) + cross);
                }
            }
            let n0 = sample.count_of(0) as f64;
            double / n - lambda * (n - n0 * n0 / n)
        }
        GofStatistic::RU => {
            if lambda <= 0.0 {
                return Err(Error::DegenerateSample(
                    "RU needs a positive sample mean".into(),
                ));
            }
            let mut double = 0.0;
            for (&xi, &ci) in xs.iter().zip(cs) {
                for (&xj, &cj) in xs.iter().zip(cs) {
                    double += (ci * cj) as f64 / (xi + xj + 1) as f64;
                }
            }
            let cross: f64 = xs
                .iter()
                .zip(cs)
                .map(|(&x, &c)| c as f64 * ru_integral(x, lambda))
                .sum();
            double / n + n * -(-2.0 * lambda).exp_m1() / (2.0 * lambda) - 2.0 * cross
        }
        GofStatistic::SR => {
            let upper = sr_upper(sample);
            let (pmf, cdf) = poisson_tables(lambda, upper);
            let fhat = empirical_cdf(sample, upper);
            let mhat = mean_distance_cdf(sample, &fhat);
            n * mhat
                .iter()
                .zip(&cdf)
                .zip(&pmf)
                .map(|((mh, c), p)| (mh - c).powi(2) * p)
                .sum::<f64>()
        }
        GofStatistic::K1 | GofStatistic::K2 | GofStatistic::KS | GofStatistic::CM => {
            let (_, cdf) = poisson_tables(lambda, m);
            let fhat = empirical_cdf(sample, m);
            let diff: Vec<f64> = fhat.iter().zip(&cdf).map(|(f, p)| f - p).collect();
            match statistic {
                GofStatistic::K1 => {
                    let abs: f64 = diff.iter().map(|d| d.abs()).sum();
                    let upper_tail: f64 = cdf.iter().map(|p| 1.0 - p).sum();
                    n.sqrt() * (abs + lambda - upper_tail)
                }
                GofStatistic::K2 => {
                    let mut partial = 0.0;
                    let mut sup = 0.0_f64;
                    // k = 1..=M uses partial sums over j = 0..k−1.
                    for d in diff.iter().take(m as usize) {
                        partial += d;
                        sup = sup.max(partial.abs());
                    }
                    n.sqrt() * sup
                }
                GofStatistic::KS => n.sqrt() * diff.iter().map(|d| d.abs()).fold(0.0, f64::max),
                _ => {
                    n * diff
                        .iter()
                        .enumerate()
                        .map(|(j, d)| d * d * sample.count_of(j as i64) as f64 / n)
                        .sum::<f64>()
                }
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates `B`.
    pub b: usize,
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { b: 500, alpha: 0.05 }
    }
}

impl BootstrapConfig {
    /// The order-statistic index `k = ⌊(1 − α)B⌋`, checked so that both
    /// `T*_{k:B}` and `T*_{k+1:B}` exist.
    pub fn order_index(&self) -> Result<usize> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        // The small offset keeps exact products such as 0.95·500 from
        // rounding down.
        let k = ((1.0 - self.alpha) * self.b as f64 + 1e-9).floor() as usize;
        if k < 1 || k + 1 > self.b {
            return Err(Error::Config(format!(
                "B = {} and alpha = {} give k = {k}; need 1 <= k < B",
                self.b, self.alpha
            )));
        }
        Ok(k)
    }
}

/// Interpolated critical value `T*_{k:B} + (1 − α)(T*_{k+1:B} − T*_{k:B})`.
pub fn critical_value(replicates: &[f64], cfg: &BootstrapConfig) -> Result<f64> {
    if replicates.len() != cfg.b {
        return Err(Error::Config(format!(
            "expected {} replicates, got {}",
            cfg.b,
            replicates.len()
        )));
    }
    let k = cfg.order_index()?;
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[k - 1], sorted[k]);
    Ok(lo + (1.0 - cfg.alpha) * (hi - lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: f64,
    pub critical_value: f64,
    /// `statistic > critical_value`.
    pub reject: bool,
    pub replicates: Option<Vec<f64>>,
}

/// Replicate statistics for each requested statistic, all computed on the
/// same `B` resamples from `Po(λ̂_n)`. Replicate `j` draws from
/// `rng.substream(j)`.
fn bootstrap_replicates(
    sample: &Sample,
    statistics: &[GofStatistic],
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<Vec<Vec<f64>>> {
    cfg.order_index()?;
    let lambda = sample.mean();
    if lambda <= 0.0 {
        return Err(Error::DegenerateSample(
            "the sample mean is 0, so the fitted Poisson law is degenerate".into(),
        ));
    }
    let sampler = PoissonSampler::new(lambda)?;
    let n = sample.len();
    let per_replicate: Vec<Vec<f64>> = (0..cfg.b)
        .into_par_iter()
        .map(|j| {
            let mut values = vec![0; n];
            sampler.fill(&mut rng.substream(j as u64).rng(), &mut values);
            let star = Sample::new(values)?;
            statistics.iter().map(|s| s.evaluate_replicate(&star)).collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..statistics.len())
        .map(|i| per_replicate.iter().map(|row| row[i]).collect())
        .collect())
}

/// Bootstrap critical value for one statistic, with the replicates.
pub fn bootstrap_critical_value(
    sample: &Sample,
    statistic: GofStatistic,
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<(f64, Vec<f64>)> {
    let reps = bootstrap_replicates(sample, &[statistic], cfg, rng)?
        .pop()
        .expect("one statistic");
    Ok((critical_value(&reps, cfg)?, reps))
}

pub fn run_test(
    sample: &Sample,
    statistic: GofStatistic,
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<TestReport> {
    Ok(run_tests(sample, &[statistic], cfg, rng)?.pop().expect("one report"))
}

/// Tests several statistics against shared bootstrap resamples.
pub fn run_tests(
    sample: &Sample,
    statistics: &[GofStatistic],
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<Vec<TestReport>> {
    let values: Vec<f64> = statistics
        .iter()
        .map(|s| s.evaluate(sample))
        .collect::<Result<_>>()?;
    let replicates = bootstrap_replicates(sample, statistics, cfg, rng)?;
    values
        .into_iter()
        .zip(replicates)
        .map(|(statistic, reps)| {
            let critical_value = critical_value(&reps, cfg)?;
            Ok(TestReport {
                statistic,
                critical_value,
                reject: statistic > critical_value,
                replicates: Some(reps),
            })
        })
        .collect()
}

/// Outcome of a Monte Carlo power study for one distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub reps: usize,
    /// Rejection counts, one per statistic.
    pub rejections: Vec<usize>,
    /// Repetitions whose sample mean was 0; counted as non-rejections.
    pub degenerate: usize,
}

impl PowerResult {
    pub fn rates(&self) -> Vec<f64> {
        self.rejections
            .iter()
            .map(|&r| r as f64 / self.reps as f64)
            .collect()
    }
}

/// Monte Carlo rejection rates of several statistics under `alt`.
/// Repetition `j` uses `rng.substream(j)`: its sample comes from
/// `substream(0)` of that stream and its bootstrap from `substream(1)`, so
/// results do not depend on how repetitions are scheduled.
pub fn rejection_rates(
    alt: &AltDistSpec,
    n: usize,
    reps: usize,
    statistics: &[GofStatistic],
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<PowerResult> {
    if reps == 0 || n == 0 {
        return Err(Error::Config("reps and n must be at least 1".into()));
    }
    cfg.order_index()?;
    let sampler = alt.sampler()?;
    let outcomes: Vec<Option<Vec<bool>>> = (0..reps)
        .into_par_iter()
        .map(|j| {
            let stream = rng.substream(j as u64);
            let values = sampler.draw_values(n, &mut stream.substream(0).rng());
            let sample = Sample::new(values)?;
            if sample.mean() == 0.0 {
                return Ok(None);
            }
            let reports = run_tests(&sample, statistics, cfg, &stream.substream(1))?;
            Ok(Some(reports.iter().map(|r| r.reject).collect()))
        })
        .collect::<Result<_>>()?;
    let mut rejections = vec![0; statistics.len()];
    let mut degenerate = 0;
    for outcome in outcomes {
        match outcome {
            Some(flags) => {
                for (count, flag) in rejections.iter_mut().zip(flags) {
                    *count += usize::from(flag);
                }
            }
            None => degenerate += 1,
        }
    }
    Ok(PowerResult {
        reps,
        rejections,
        degenerate,
    })
}

/// Single-statistic convenience wrapper around [`rejection_rates`].
pub fn rejection_rate(
    alt: &AltDistSpec,
    n: usize,
    reps: usize,
    statistic: GofStatistic,
    cfg: &BootstrapConfig,
    rng: &RandomStream,
) -> Result<f64> {
    Ok(rejection_rates(alt, n, reps, &[statistic], cfg, rng)?.rates()[0])
}
