//! Discrete distribution families on contiguous integer supports.
//!
//! Every model exposes its forward score ratio `Δ⁺p(k)/p(k)` in closed form.
//! For the exponential-polynomial and Gibbs families the normalizing constant
//! is only summed when a normalized quantity (`pmf`, `cdf`, moments) is asked
//! for, and the score never touches it.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{domain, Error, Result};

/// Stop summing an exponential-polynomial normalizer once a term drops below
/// this fraction of the running sum.
const EXPPOLY_TERM_CUTOFF: f64 = 1e-16;
/// Upper-tail mass left out by truncated sums over infinite supports.
pub const TAIL_MASS: f64 = 1e-14;
const MAX_TRUNCATION: i64 = 50_000_000;

thread_local! {
    static NORMALIZER_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// How many normalizing constants (exponential-polynomial or Gibbs) the
/// current thread has summed so far.
pub fn normalizer_evaluations() -> u64 {
    NORMALIZER_EVALS.with(Cell::get)
}

fn count_normalizer() {
    NORMALIZER_EVALS.with(|c| c.set(c.get() + 1));
}

/// Support `{lower, ..., upper}`; `upper == None` means `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportRange {
    lower: i64,
    upper: Option<i64>,
}

impl SupportRange {
    pub fn new(lower: i64, upper: Option<i64>) -> Result<Self> {
        if let Some(u) = upper {
            if u <= lower {
                return Err(domain(format!(
                    "support upper bound {u} must exceed lower bound {lower}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> Option<i64> {
        self.upper
    }

    pub fn is_finite(&self) -> bool {
        self.upper.is_some()
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.lower && self.upper.is_none_or(|u| k <= u)
    }
}

impl fmt::Display for SupportRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "{{{}, ..., {}}}", self.lower, u),
            None => write!(f, "{{{}, {}, ...}}", self.lower, self.lower + 1),
        }
    }
}

/// Energy callback for Gibbs measures with infinitely many states.
pub type EnergyFn = Arc<dyn Fn(i64) -> f64 + Send + Sync>;

/// Thermodynamic constants of a Gibbs measure. `kappa` is the Boltzmann
/// constant in whatever units the energies use; it defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsParams {
    pub mu: f64,
    pub temperature: f64,
    pub kappa: f64,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            temperature: 1.0,
            kappa: 1.0,
        }
    }
}

#[derive(Clone)]
pub enum GibbsStates {
    /// States `1..=S` with energies `V(k)` and particle numbers `N(k)`.
    Finite {
        energies: Vec<f64>,
        particles: Vec<u64>,
    },
    /// States `1, 2, ...` with a fixed particle number (so `μ` drops out of
    /// every ratio) and a user-chosen summation bound for the partition
    /// function.
    Unbounded { energy: EnergyFn, truncation: i64 },
}

impl fmt::Debug for GibbsStates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite {
                energies,
                particles,
            } => f
                .debug_struct("Finite")
                .field("energies", energies)
                .field("particles", particles)
                .finish(),
            Self::Unbounded { truncation, .. } => f
                .debug_struct("Unbounded")
                .field("truncation", truncation)
                .finish_non_exhaustive(),
        }
    }
}

/// Parameters of a distribution family.
#[derive(Debug, Clone)]
pub enum Family {
    Poisson { lambda: f64 },
    NegBinomial { r: f64, q: f64 },
    Binomial { m: i64, q: f64 },
    Uniform { m: i64 },
    Gibbs { states: GibbsStates, params: GibbsParams },
    /// `p(k) ∝ exp(θ₁k + ... + θ_d k^d)` on `k >= 1`; `theta[i]` multiplies `k^(i+1)`.
    ExpPoly { theta: Vec<f64> },
}

#[derive(Debug, Clone, Copy)]
struct Normalizer {
    log_norm: f64,
    /// Last index included in the (possibly truncated) normalizing sum.
    upper: i64,
}

/// A discrete distribution on a contiguous integer support. Immutable once
/// built; normalizing constants are computed lazily and cached.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    family: Family,
    support: SupportRange,
    normalizer: OnceLock<Normalizer>,
    truncation: OnceLock<i64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be a positive real, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn ln_factorial(k: i64) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// `Σ θ_i ((k+1)^i − k^i)`, the log of `p(k+1)/p(k)` for the
/// exponential-polynomial family.
pub(crate) fn exppoly_log_ratio(theta: &[f64], k: i64) -> f64 {
    let k = k as f64;
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let mut acc = 0.0;
    for &t in theta {
        lo *= k;
        hi *= k + 1.0;
        acc += t * (hi - lo);
    }
    acc
}

/// `θ₁k + ... + θ_d k^d`.
pub(crate) fn exppoly_log_weight(theta: &[f64], k: i64) -> f64 {
    let k = k as f64;
    let mut pow = 1.0;
    let mut acc = 0.0;
    for &t in theta {
        pow *= k;
        acc += t * pow;
    }
    acc
}

impl DiscreteModel {
    fn build(family: Family, lower: i64, upper: Option<i64>) -> Result<Self> {
        Ok(Self {
            family,
            support: SupportRange::new(lower, upper)?,
            normalizer: OnceLock::new(),
            truncation: OnceLock::new(),
        })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Self::build(Family::Poisson { lambda }, 0, None)
    }

    pub fn neg_binomial(r: f64, q: f64) -> Result<Self> {
        positive("r", r)?;
        unit_open("q", q)?;
        Self::build(Family::NegBinomial { r, q }, 0, None)
    }

    pub fn binomial(m: i64, q: f64) -> Result<Self> {
        if m < 1 {
            return Err(domain(format!("binomial size m must be >= 1, got {m}")));
        }
        unit_open("q", q)?;
        Self::build(Family::Binomial { m, q }, 0, Some(m))
    }

    /// Uniform distribution on `{1, ..., m}`.
    pub fn uniform(m: i64) -> Result<Self> {
        if m < 2 {
            return Err(domain(format!("uniform size m must be >= 2, got {m}")));
        }
        Self::build(Family::Uniform { m }, 1, Some(m))
    }

    /// Gibbs measure on the states `1..=S`, `S = energies.len()`.
    pub fn gibbs(energies: Vec<f64>, particles: Vec<u64>, params: GibbsParams) -> Result<Self> {
        let s = energies.len();
        if s < 2 {
            return Err(domain("a Gibbs measure needs at least two states"));
        }
        if particles.len() != s {
            return Err(domain(format!(
                "{} energies but {} particle numbers",
                s,
                particles.len()
            )));
        }
        if let Some(k) = energies.iter().position(|v| !v.is_finite()) {
            // p(k) = 0 inside the declared support breaks the contiguity of the support.
            return Err(domain(format!(
                "state {} has non-finite energy, giving zero mass inside the support",
                k + 1
            )));
        }
        if particles.contains(&0) {
            return Err(domain("particle numbers must be positive"));
        }
        Self::check_gibbs_params(&params)?;
        Self::build(
            Family::Gibbs {
                states: GibbsStates::Finite {
                    energies,
                    particles,
                },
                params,
            },
            1,
            Some(s as i64),
        )
    }

    /// Gibbs measure on `1, 2, ...` with a fixed particle number. The
    /// partition function is summed over `1..=truncation`; choosing a bound
    /// past which the mass is negligible is up to the caller
    /// ([`check_c2`] helps to diagnose the tail).
    pub fn gibbs_unbounded(energy: EnergyFn, params: GibbsParams, truncation: i64) -> Result<Self> {
        if truncation < 2 {
            return Err(domain("truncation bound must be at least 2"));
        }
        Self::check_gibbs_params(&params)?;
        Self::build(
            Family::Gibbs {
                states: GibbsStates::Unbounded { energy, truncation },
                params,
            },
            1,
            None,
        )
    }

    fn check_gibbs_params(p: &GibbsParams) -> Result<()> {
        positive("temperature", p.temperature)?;
        positive("kappa", p.kappa)?;
        if !p.mu.is_finite() {
            return Err(domain("chemical potential must be finite"));
        }
        Ok(())
    }

    /// Exponential-polynomial model with coefficients `θ₁, ..., θ_d`,
    /// `d >= 2`, `θ_d < 0`.
    pub fn exp_poly(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(domain("exponential-polynomial models need d >= 2"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(domain("coefficients must be finite"));
        }
        let last = *theta.last().expect("d >= 2");
        if last >= 0.0 {
            return Err(domain(format!(
                "the leading coefficient must be negative, got {last}"
            )));
        }
        Self::build(Family::ExpPoly { theta }, 1, None)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn support(&self) -> SupportRange {
        self.support
    }

    fn check_support(&self, k: i64) -> Result<()> {
        if self.support.contains(k) {
            Ok(())
        } else {
            Err(domain(format!("{k} is outside the support {}", self.support)))
        }
    }

    fn gibbs_exponent(states: &GibbsStates, params: &GibbsParams, k: i64) -> f64 {
        let kt = params.kappa * params.temperature;
        match states {
            GibbsStates::Finite {
                energies,
                particles,
            } => {
                let i = (k - 1) as usize;
                (params.mu * particles[i] as f64 - energies[i]) / kt
            }
            GibbsStates::Unbounded { energy, .. } => -energy(k) / kt,
        }
    }

    /// Forward score ratio `Δ⁺p(k)/p(k) = p(k+1)/p(k) − 1`, with `p(R+1) = 0`
    /// on a finite support.
    pub fn score_forward(&self, k: i64) -> Result<f64> {
        self.check_support(k)?;
        let at_top = self.support.upper == Some(k);
        Ok(match &self.family {
            Family::Poisson { lambda } => lambda / (k as f64 + 1.0) - 1.0,
            Family::NegBinomial { r, q } => (r + k as f64) / (k as f64 + 1.0) * (1.0 - q) - 1.0,
            _ if at_top => -1.0,
            Family::Binomial { m, q } => q / (1.0 - q) * ((m - k) as f64) / (k as f64 + 1.0) - 1.0,
            Family::Uniform { .. } => 0.0,
            Family::Gibbs { states, params } => {
                let kt = params.kappa * params.temperature;
                let arg = match states {
                    GibbsStates::Finite {
                        energies,
                        particles,
                    } => {
                        let i = (k - 1) as usize;
                        (energies[i] - energies[i + 1]
                            + params.mu * (particles[i + 1] as f64 - particles[i] as f64))
                            / kt
                    }
                    GibbsStates::Unbounded { energy, .. } => (energy(k) - energy(k + 1)) / kt,
                };
                arg.exp_m1()
            }
            Family::ExpPoly { theta } => exppoly_log_ratio(theta, k).exp_m1(),
        })
    }

    /// Backward score ratio `Δ⁻p(k)/p(k) = 1 − p(k−1)/p(k)`, with
    /// `p(L−1) = 0`. Only defined for finite supports.
    pub fn score_backward(&self, k: i64) -> Result<f64> {
        if !self.support.is_finite() {
            return Err(Error::Unsupported(
                "backward scores need a finite upper support bound".into(),
            ));
        }
        self.check_support(k)?;
        if k == self.support.lower {
            return Ok(1.0);
        }
        Ok(match &self.family {
            Family::Binomial { m, q } => 1.0 - (1.0 - q) / q * (k as f64) / ((m - k + 1) as f64),
            Family::Uniform { .. } => 0.0,
            Family::Gibbs { states, params } => {
                let lower = Self::gibbs_exponent(states, params, k - 1);
                let here = Self::gibbs_exponent(states, params, k);
                -(lower - here).exp_m1()
            }
            // Remaining families have unbounded support.
            _ => unreachable!("finite support checked above"),
        })
    }

    fn normalizer(&self) -> Normalizer {
        *self.normalizer.get_or_init(|| {
            count_normalizer();
            match &self.family {
                Family::ExpPoly { theta } => exppoly_normalizer(theta),
                Family::Gibbs { states, params } => {
                    let upper = match states {
                        GibbsStates::Finite { energies, .. } => energies.len() as i64,
                        GibbsStates::Unbounded { truncation, .. } => *truncation,
                    };
                    let exps: Vec<f64> = (1..=upper)
                        .map(|k| Self::gibbs_exponent(states, params, k))
                        .collect();
                    Normalizer {
                        log_norm: log_sum_exp(&exps),
                        upper,
                    }
                }
                _ => Normalizer {
                    log_norm: 0.0,
                    upper: i64::MAX,
                },
            }
        })
    }

    /// Normalized probability mass at `k` (zero outside the support).
    pub fn pmf(&self, k: i64) -> f64 {
        if !self.support.contains(k) {
            return 0.0;
        }
        match &self.family {
            Family::Poisson { lambda } => {
                (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
            }
            Family::NegBinomial { r, q } => {
                let kf = k as f64;
                (libm::lgamma(kf + r) - libm::lgamma(*r) - ln_factorial(k)
                    + kf * (1.0 - q).ln()
                    + r * q.ln())
                .exp()
            }
            Family::Binomial { m, q } => {
                let kf = k as f64;
                (ln_factorial(*m) - ln_factorial(k) - ln_factorial(m - k)
                    + kf * q.ln()
                    + (m - k) as f64 * (1.0 - q).ln())
                .exp()
            }
            Family::Uniform { m } => 1.0 / *m as f64,
            Family::Gibbs { states, params } => {
                (Self::gibbs_exponent(states, params, k) - self.normalizer().log_norm).exp()
            }
            Family::ExpPoly { theta } => {
                (exppoly_log_weight(theta, k) - self.normalizer().log_norm).exp()
            }
        }
    }

    /// Largest index included in truncated sums over the support: `R` for
    /// finite supports, otherwise a point beyond which less than
    /// [`TAIL_MASS`] of the mass remains.
    pub fn truncation_upper(&self) -> i64 {
        if let Some(u) = self.support.upper {
            return u;
        }
        *self.truncation.get_or_init(|| match &self.family {
            Family::ExpPoly { .. } | Family::Gibbs { .. } => self.normalizer().upper,
            _ => {
                let mut cum = 0.0;
                let mut k = self.support.lower;
                loop {
                    let p = self.pmf(k);
                    cum += p;
                    let decreasing = self.score_forward(k).map(|s| s < 0.0).unwrap_or(true);
                    if (cum >= 1.0 - TAIL_MASS && p < 1e-17 && decreasing) || k >= MAX_TRUNCATION {
                        break k;
                    }
                    k += 1;
                }
            }
        })
    }

    /// Mass function tabulated over `L..=truncation_upper()`.
    pub fn pmf_table(&self) -> Vec<f64> {
        (self.support.lower..=self.truncation_upper())
            .map(|k| self.pmf(k))
            .collect()
    }

    /// Distribution function `P(k) = Σ_{ℓ=L}^{k} p(ℓ)`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < self.support.lower {
            return 0.0;
        }
        let top = k.min(self.truncation_upper());
        let s: f64 = (self.support.lower..=top).map(|l| self.pmf(l)).sum();
        if k >= self.truncation_upper() && self.support.is_finite() {
            1.0_f64.min(s)
        } else {
            s
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            Family::Poisson { lambda } => *lambda,
            Family::NegBinomial { r, q } => r * (1.0 - q) / q,
            Family::Binomial { m, q } => *m as f64 * q,
            Family::Uniform { m } => (*m as f64 + 1.0) / 2.0,
            _ => (self.support.lower..=self.truncation_upper())
                .map(|k| k as f64 * self.pmf(k))
                .sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.family {
            Family::Poisson { lambda } => *lambda,
            Family::NegBinomial { r, q } => r * (1.0 - q) / (q * q),
            Family::Binomial { m, q } => *m as f64 * q * (1.0 - q),
            Family::Uniform { m } => ((*m * *m) as f64 - 1.0) / 12.0,
            _ => {
                let mu = self.mean();
                (self.support.lower..=self.truncation_upper())
                    .map(|k| (k as f64 - mu).powi(2) * self.pmf(k))
                    .sum()
            }
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn exppoly_normalizer(theta: &[f64]) -> Normalizer {
    // Online log-sum-exp: running sum = scale · e^{shift}.
    let mut shift = f64::NEG_INFINITY;
    let mut scale = 0.0_f64;
    let mut k = 1_i64;
    loop {
        let lw = exppoly_log_weight(theta, k);
        if lw > shift {
            scale = scale * (shift - lw).exp() + 1.0;
            shift = lw;
        } else {
            scale += (lw - shift).exp();
        }
        let rel_term = (lw - shift).exp() / scale;
        let decreasing = exppoly_log_ratio(theta, k) < 0.0;
        if (rel_term < EXPPOLY_TERM_CUTOFF && decreasing) || k >= MAX_TRUNCATION {
            return Normalizer {
                log_norm: shift + scale.ln(),
                upper: k,
            };
        }
        k += 1;
    }
}

/// Numeric diagnostic for the regularity condition on
/// `|Δ⁺p(k) · min{P(k), 1 − P(k)} / (p(k) p(k+1))|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// Maximum of the expression over `L <= k <= min(k_max, R − 1)`.
    pub sup: f64,
    /// Largest value of `|Δ⁺p(k)(1 − P(k)) / (p(k)p(k+1))|` over the last ten
    /// evaluated `k`: a proxy for its limit superior.
    pub limsup_proxy: f64,
    /// Whether the running maximum has stopped growing (relative step
    /// increase below `1e-6` throughout the last ten evaluated `k`).
    pub stabilized: bool,
}

/// `Σ_{j>=0} p(k+j)/p(k)`, built from score ratios so that no normalizing
/// constant is needed.
pub(crate) fn tail_over_pmf(model: &DiscreteModel, k: i64) -> f64 {
    let mut sum = 1.0;
    let mut prod = 1.0;
    let mut l = k;
    for _ in 0..10_000_000 {
        let ratio = match model.score_forward(l) {
            Ok(s) => 1.0 + s,
            Err(_) => break,
        };
        prod *= ratio;
        if prod == 0.0 {
            break;
        }
        sum += prod;
        if prod < 1e-17 * sum && ratio < 1.0 {
            break;
        }
        l += 1;
    }
    sum
}

/// Evaluates the regularity diagnostic up to `k_max`. Head and tail masses
/// are accumulated as ratios to `p(k+1)`, so the report is free of
/// normalizing constants and does not underflow far in the tail.
pub fn check_c2(model: &DiscreteModel, k_max: i64) -> Result<ConditionReport> {
    let lower = model.support().lower();
    if k_max < lower {
        return Err(domain(format!("k_max {k_max} is below the support lower bound {lower}")));
    }
    let last = match model.support().upper() {
        Some(r) => k_max.min(r - 1),
        None => k_max,
    };
    let mut head = 0.0_f64; // P(k−1)/p(k)
    let mut running = 0.0_f64;
    let mut maxima = Vec::with_capacity((last - lower + 1).max(0) as usize);
    let mut tails = Vec::with_capacity(maxima.capacity());
    for k in lower..=last {
        let score = model.score_forward(k)?;
        head = (head + 1.0) / (1.0 + score); // now P(k)/p(k+1)
        let tail = tail_over_pmf(model, k + 1); // (1 − P(k))/p(k+1)
        let value = (score * head.min(tail)).abs();
        running = running.max(value);
        maxima.push(running);
        tails.push((score * tail).abs());
    }
    let window = maxima.len().min(11);
    let recent = &maxima[maxima.len() - window..];
    let stabilized = model.support().is_finite()
        || recent
            .windows(2)
            .all(|w| w[1] - w[0] <= 1e-6 * w[0].abs().max(f64::MIN_POSITIVE));
    let limsup_proxy = tails[tails.len().saturating_sub(10)..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(ConditionReport {
        sup: running,
        limsup_proxy,
        stabilized,
    })
}

impl FromStr for DiscreteModel {
    type Err = Error;

    /// Parses `poisson:lambda=5`, `negbin:r=2,q=0.25`, `binom:m=10,q=0.5`,
    /// `uniform:m=6` or `exppoly:theta=0.5,0,-0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let perr = |reason: &str| Error::Parse {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (name, body) = s.split_once(':').ok_or_else(|| perr("expected `family:params`"))?;
        let params = crate::parse_params(s, body)?;
        let int = |v: f64| -> Result<i64> {
            if v.fract() == 0.0 {
                Ok(v as i64)
            } else {
                Err(perr("expected an integer"))
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "poisson" | "po" => Self::poisson(crate::take_param(s, &params, &["lambda"])?),
            "negbin" | "nb" => Self::neg_binomial(
                crate::take_param(s, &params, &["r"])?,
                crate::take_param(s, &params, &["q"])?,
            ),
            "binom" | "bin" => Self::binomial(
                int(crate::take_param(s, &params, &["m"])?)?,
                crate::take_param(s, &params, &["q"])?,
            ),
            "uniform" => Self::uniform(int(crate::take_param(s, &params, &["m"])?)?),
            "exppoly" => {
                let theta = params
                    .iter()
                    .find(|(k, _)| k == "theta")
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| perr("missing `theta`"))?;
                Self::exp_poly(theta)
            }
            other => Err(perr(&format!("unknown family `{other}`"))),
        }
    }
}
