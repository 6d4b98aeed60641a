//! Reproducible random streams and samplers for every distribution used in
//! the simulation studies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::models::DiscreteModel;
use crate::sample::Sample;

/// A `(seed, stream)` pair naming one independent ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    /// Child stream for work item `index`; a pure function of
    /// `(seed, stream_id, index)`.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Uniform on `(0, 1]`, safe to take logarithms of.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Inversion sampler over a tabulated mass function starting at `offset`.
#[derive(Debug, Clone)]
struct TableSampler {
    offset: i64,
    cdf: Vec<f64>,
}

impl TableSampler {
    /// Tabulates `pmf(offset), pmf(offset+1), ...` in order until the
    /// remaining mass is negligible or `max_len` entries are stored.
    fn from_pmf(offset: i64, mut pmf: impl FnMut(i64) -> f64, max_len: usize) -> Self {
        let mut cdf = Vec::new();
        let mut total = 0.0;
        for i in 0..max_len {
            let p = pmf(offset + i as i64);
            total += p;
            cdf.push(total);
            if total >= 1.0 - 1e-16 && i > 0 && p < 1e-18 {
                break;
            }
        }
        Self { offset, cdf }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let total = *self.cdf.last().expect("non-empty table");
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.offset + i as i64
    }
}

/// Poisson sampler by inversion of a precomputed distribution table.
#[derive(Debug, Clone)]
pub struct PoissonSampler(TableSampler);

impl PoissonSampler {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(domain(format!("Poisson mean must be positive, got {lambda}")));
        }
        // `from_pmf` visits k = 0, 1, 2, ... in order.
        let mut p = (-lambda).exp();
        let table = TableSampler::from_pmf(
            0,
            |k| {
                if k > 0 {
                    p *= lambda / k as f64;
                }
                p
            },
            100_000,
        );
        Ok(Self(table))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.0.draw(rng)
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i64]) {
        for v in out {
            *v = self.draw(rng);
        }
    }
}

/// An alternative (or null) distribution from the power study.
#[derive(Debug, Clone, PartialEq)]
pub enum AltDistSpec {
    Poisson { lambda: f64 },
    /// Uniform on `{0, ..., m}`.
    Uniform { m: i64 },
    Binomial { m: i64, q: f64 },
    /// `q·Po(θ₁) + (1 − q)·Po(θ₂)`.
    PoissonMixture { q: f64, theta1: f64, theta2: f64 },
    /// `w·Po(λ) + (1 − w)·δ₀`.
    PoissonDeltaZero { lambda: f64, w: f64 },
    /// `P(X >= k) = q^(k^β)` on `{0, 1, ...}`.
    DiscreteWeibull { q: f64, beta: f64 },
    /// `P(X = 0) = p0`; otherwise zero-truncated `Po(λ)`.
    ZeroModifiedPoisson { lambda: f64, p0: f64 },
    ZeroTruncatedPoisson { lambda: f64 },
    /// `|Y|` where `Y` is `N(μ, 1)` rounded to the nearest integer.
    AbsDiscreteNormal { mu: f64 },
    NegBinomial { r: f64, q: f64 },
    ExpPoly { theta: Vec<f64> },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn poisson_pmf(lambda: f64, k: i64) -> f64 {
    (k as f64 * lambda.ln() - lambda - libm::lgamma(k as f64 + 1.0)).exp()
}

impl AltDistSpec {
    /// Checks parameter domains.
    pub fn validate(&self) -> Result<()> {
        let pos = |n: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(domain(format!("{n} must be positive, got {v}")))
            }
        };
        let unit = |n: &str, v: f64| -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(domain(format!("{n} must lie in (0, 1), got {v}")))
            }
        };
        match self {
            Self::Poisson { lambda } | Self::ZeroTruncatedPoisson { lambda } => pos("lambda", *lambda),
            Self::Uniform { m } => {
                if *m >= 1 {
                    Ok(())
                } else {
                    Err(domain("uniform needs m >= 1"))
                }
            }
            Self::Binomial { m, q } => {
                if *m < 1 {
                    return Err(domain("binomial needs m >= 1"));
                }
                unit("q", *q)
            }
            Self::PoissonMixture { q, theta1, theta2 } => {
                unit("q", *q)?;
                pos("theta1", *theta1)?;
                pos("theta2", *theta2)
            }
            Self::PoissonDeltaZero { lambda, w } => {
                pos("lambda", *lambda)?;
                unit("w", *w)
            }
            Self::DiscreteWeibull { q, beta } => {
                unit("q", *q)?;
                pos("beta", *beta)
            }
            Self::ZeroModifiedPoisson { lambda, p0 } => {
                pos("lambda", *lambda)?;
                if (0.0..1.0).contains(p0) {
                    Ok(())
                } else {
                    Err(domain(format!("zero mass must lie in [0, 1), got {p0}")))
                }
            }
            Self::AbsDiscreteNormal { mu } => {
                if mu.is_finite() {
                    Ok(())
                } else {
                    Err(domain("mu must be finite"))
                }
            }
            Self::NegBinomial { r, q } => DiscreteModel::neg_binomial(*r, *q).map(|_| ()),
            Self::ExpPoly { theta } => DiscreteModel::exp_poly(theta.clone()).map(|_| ()),
        }
    }

    /// Probability mass at `k`.
    pub fn pmf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match self {
            Self::Poisson { lambda } => poisson_pmf(*lambda, k),
            Self::Uniform { m } => {
                if k <= *m {
                    1.0 / (*m + 1) as f64
                } else {
                    0.0
                }
            }
            Self::Binomial { m, q } => DiscreteModel::binomial(*m, *q).map_or(0.0, |b| b.pmf(k)),
            Self::PoissonMixture { q, theta1, theta2 } => {
                q * poisson_pmf(*theta1, k) + (1.0 - q) * poisson_pmf(*theta2, k)
            }
            Self::PoissonDeltaZero { lambda, w } => {
                w * poisson_pmf(*lambda, k) + if k == 0 { 1.0 - w } else { 0.0 }
            }
            Self::DiscreteWeibull { q, beta } => {
                let surv = |j: i64| q.powf((j as f64).powf(*beta));
                surv(k) - surv(k + 1)
            }
            Self::ZeroModifiedPoisson { lambda, p0 } => {
                if k == 0 {
                    *p0
                } else {
                    (1.0 - p0) * poisson_pmf(*lambda, k) / -(-lambda).exp_m1()
                }
            }
            Self::ZeroTruncatedPoisson { lambda } => {
                if k == 0 {
                    0.0
                } else {
                    poisson_pmf(*lambda, k) / -(-lambda).exp_m1()
                }
            }
            Self::AbsDiscreteNormal { mu } => {
                let cell = |j: f64| std_normal_cdf(j + 0.5 - mu) - std_normal_cdf(j - 0.5 - mu);
                if k == 0 {
                    cell(0.0)
                } else {
                    cell(k as f64) + cell(-(k as f64))
                }
            }
            Self::NegBinomial { r, q } => DiscreteModel::neg_binomial(*r, *q).map_or(0.0, |m| m.pmf(k)),
            Self::ExpPoly { theta } => DiscreteModel::exp_poly(theta.clone()).map_or(0.0, |m| m.pmf(k)),
        }
    }

    /// Analytic mean (a truncated sum where no closed form is used).
    pub fn mean(&self) -> f64 {
        match self {
            Self::Poisson { lambda } => *lambda,
            Self::Uniform { m } => *m as f64 / 2.0,
            Self::Binomial { m, q } => *m as f64 * q,
            Self::PoissonMixture { q, theta1, theta2 } => q * theta1 + (1.0 - q) * theta2,
            Self::PoissonDeltaZero { lambda, w } => w * lambda,
            Self::ZeroModifiedPoisson { lambda, p0 } => (1.0 - p0) * lambda / -(-lambda).exp_m1(),
            Self::ZeroTruncatedPoisson { lambda } => lambda / -(-lambda).exp_m1(),
            Self::NegBinomial { r, q } => r * (1.0 - q) / q,
            Self::ExpPoly { theta } => DiscreteModel::exp_poly(theta.clone()).map_or(f64::NAN, |m| m.mean()),
            Self::DiscreteWeibull { .. } | Self::AbsDiscreteNormal { .. } => {
                (0..100_000).map(|k| k as f64 * self.pmf(k)).sum()
            }
        }
    }

    /// Builds a sampler, precomputing any inversion tables.
    pub fn sampler(&self) -> Result<AltSampler> {
        self.validate()?;
        let kind = match self {
            Self::Poisson { lambda } => Kind::Poisson(PoissonSampler::new(*lambda)?),
            Self::Uniform { m } => Kind::Uniform(*m),
            Self::Binomial { m, q } => Kind::Binomial(*m, *q),
            Self::PoissonMixture { q, theta1, theta2 } => Kind::Mixture(
                *q,
                PoissonSampler::new(*theta1)?,
                PoissonSampler::new(*theta2)?,
            ),
            Self::PoissonDeltaZero { lambda, w } => Kind::DeltaZero(*w, PoissonSampler::new(*lambda)?),
            Self::DiscreteWeibull { q, beta } => Kind::Weibull(q.ln(), 1.0 / beta),
            Self::ZeroModifiedPoisson { lambda, p0 } => Kind::ZeroModified(*p0, PoissonSampler::new(*lambda)?),
            Self::ZeroTruncatedPoisson { lambda } => Kind::ZeroTruncated(PoissonSampler::new(*lambda)?),
            Self::AbsDiscreteNormal { .. } => {
                Kind::Table(TableSampler::from_pmf(0, |k| self.pmf(k), 1_000_000))
            }
            Self::NegBinomial { r, q } => {
                let mut p = q.powf(*r);
                let table = TableSampler::from_pmf(
                    0,
                    |k| {
                        if k > 0 {
                            p *= (r + (k - 1) as f64) / k as f64 * (1.0 - q);
                        }
                        p
                    },
                    10_000_000,
                );
                Kind::Table(table)
            }
            Self::ExpPoly { theta } => {
                let model = DiscreteModel::exp_poly(theta.clone())?;
                let table = model.pmf_table();
                Kind::Table(TableSampler::from_pmf(1, |k| table[(k - 1) as usize], table.len()))
            }
        };
        Ok(AltSampler { kind })
    }

    /// The 45 rows of the power study, in table order.
    pub fn table1_rows() -> Vec<AltDistSpec> {
        use AltDistSpec::*;
        let mut rows = Vec::with_capacity(45);
        for lambda in [1.0, 5.0, 10.0, 30.0] {
            rows.push(Poisson { lambda });
        }
        for m in [1, 2, 3, 5, 6] {
            rows.push(Uniform { m });
        }
        for (m, q) in [
            (2, 0.5),
            (4, 0.25),
            (10, 0.1),
            (10, 0.5),
            (1, 0.5),
            (2, 2.0 / 3.0),
            (3, 0.75),
            (9, 0.9),
            (5, 0.5),
            (10, 2.0 / 3.0),
            (15, 0.75),
            (45, 0.9),
        ] {
            rows.push(Binomial { m, q });
        }
        for (q, theta1, theta2) in [
            (0.5, 2.0, 5.0),
            (0.5, 3.0, 5.0),
            (0.25, 1.0, 5.0),
            (0.05, 1.0, 5.0),
            (0.01, 1.0, 5.0),
        ] {
            rows.push(PoissonMixture { q, theta1, theta2 });
        }
        rows.push(PoissonDeltaZero { lambda: 3.0, w: 0.9 });
        for (q, beta) in [
            (0.5, 1.0),
            (0.25, 1.0),
            (0.5, 2.0),
            (0.25, 2.0),
            (0.75, 2.0),
            (0.1, 1.0),
            (0.9, 3.0),
        ] {
            rows.push(DiscreteWeibull { q, beta });
        }
        for (lambda, p0) in [(1.0, 0.1), (1.0, 0.5), (1.0, 0.8), (2.0, 0.1), (3.0, 0.1)] {
            rows.push(ZeroModifiedPoisson { lambda, p0 });
        }
        for lambda in [2.0, 3.0, 5.0] {
            rows.push(ZeroTruncatedPoisson { lambda });
        }
        for mu in [0.0, 2.0, 3.0] {
            rows.push(AbsDiscreteNormal { mu });
        }
        rows
    }
}

/// Formats a parameter compactly, writing thirds as fractions.
fn fmt_param(v: f64) -> String {
    let thirds = v * 3.0;
    if v.fract() != 0.0 && (thirds - thirds.round()).abs() < 1e-12 {
        format!("{}/3", thirds.round())
    } else {
        format!("{v}")
    }
}

impl fmt::Display for AltDistSpec {
    /// Table-style label; parameters are separated by `;` so labels are
    /// safe inside CSV fields.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = fmt_param;
        match self {
            Self::Poisson { lambda } => write!(f, "Po({})", p(*lambda)),
            Self::Uniform { m } => write!(f, "U{{0..{m}}}"),
            Self::Binomial { m, q } => write!(f, "Bin({m};{})", p(*q)),
            Self::PoissonMixture { q, theta1, theta2 } => {
                write!(f, "PP({};{};{})", p(*q), p(*theta1), p(*theta2))
            }
            Self::PoissonDeltaZero { lambda, w } => write!(f, "Po({})d0(w={})", p(*lambda), p(*w)),
            Self::DiscreteWeibull { q, beta } => write!(f, "W({};{})", p(*q), p(*beta)),
            Self::ZeroModifiedPoisson { lambda, p0 } => write!(f, "zmPo({};{})", p(*lambda), p(*p0)),
            Self::ZeroTruncatedPoisson { lambda } => write!(f, "ztPo({})", p(*lambda)),
            Self::AbsDiscreteNormal { mu } => write!(f, "|N({};1)|", p(*mu)),
            Self::NegBinomial { r, q } => write!(f, "NB({};{})", p(*r), p(*q)),
            Self::ExpPoly { theta } => {
                let parts: Vec<String> = theta.iter().map(|t| p(*t)).collect();
                write!(f, "EP({})", parts.join(";"))
            }
        }
    }
}

impl FromStr for AltDistSpec {
    type Err = Error;

    /// Parses `po:lambda=5`, `unif:m=2`, `bin:m=2,q=0.5`,
    /// `pp:q=0.25,t1=1,t2=5`, `podelta:lambda=3,w=0.9`, `w:q=0.5,b=2`,
    /// `zmpo:lambda=1,q=0.5`, `ztpo:lambda=2`, `absnorm:mu=3`,
    /// `nb:r=2,q=0.25` or `exppoly:theta=0.5,0,-0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let perr = |reason: String| Error::Parse {
            spec: s.to_string(),
            reason,
        };
        let (name, body) = s
            .split_once(':')
            .ok_or_else(|| perr("expected `family:params`".into()))?;
        let params = crate::parse_params(s, body)?;
        let get = |names: &[&str]| crate::take_param(s, &params, names);
        let int = |v: f64| -> Result<i64> {
            if v.fract() == 0.0 {
                Ok(v as i64)
            } else {
                Err(perr(format!("{v} is not an integer")))
            }
        };
        let spec = match name.trim().to_ascii_lowercase().as_str() {
            "po" | "poisson" => Self::Poisson { lambda: get(&["lambda"])? },
            "unif" | "u" => Self::Uniform { m: int(get(&["m"])?)? },
            "bin" | "binom" => Self::Binomial {
                m: int(get(&["m"])?)?,
                q: get(&["q"])?,
            },
            "pp" => Self::PoissonMixture {
                q: get(&["q"])?,
                theta1: get(&["t1", "theta1"])?,
                theta2: get(&["t2", "theta2"])?,
            },
            "podelta" => Self::PoissonDeltaZero {
                lambda: get(&["lambda"])?,
                w: get(&["w"]).unwrap_or(0.9),
            },
            "w" | "weibull" => Self::DiscreteWeibull {
                q: get(&["q"])?,
                beta: get(&["b", "beta"])?,
            },
            "zmpo" => Self::ZeroModifiedPoisson {
                lambda: get(&["lambda"])?,
                p0: get(&["q", "p0"])?,
            },
            "ztpo" => Self::ZeroTruncatedPoisson { lambda: get(&["lambda"])? },
            "absnorm" => Self::AbsDiscreteNormal { mu: get(&["mu"])? },
            "nb" | "negbin" => Self::NegBinomial {
                r: get(&["r"])?,
                q: get(&["q"])?,
            },
            "exppoly" => Self::ExpPoly {
                theta: params
                    .iter()
                    .find(|(k, _)| k == "theta")
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| perr("missing `theta`".into()))?,
            },
            other => return Err(perr(format!("unknown distribution `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Poisson(PoissonSampler),
    Uniform(i64),
    Binomial(i64, f64),
    Mixture(f64, PoissonSampler, PoissonSampler),
    DeltaZero(f64, PoissonSampler),
    /// `(ln q, 1/β)`.
    Weibull(f64, f64),
    ZeroModified(f64, PoissonSampler),
    ZeroTruncated(PoissonSampler),
    Table(TableSampler),
}

/// A prepared sampler for one [`AltDistSpec`].
#[derive(Debug, Clone)]
pub struct AltSampler {
    kind: Kind,
}

impl AltSampler {
    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.kind {
            Kind::Poisson(p) => p.draw(rng),
            Kind::Uniform(m) => rng.random_range(0..=*m),
            Kind::Binomial(m, q) => (0..*m).filter(|_| rng.random::<f64>() < *q).count() as i64,
            Kind::Mixture(q, a, b) => {
                if rng.random::<f64>() < *q {
                    a.draw(rng)
                } else {
                    b.draw(rng)
                }
            }
            Kind::DeltaZero(w, p) => {
                if rng.random::<f64>() < *w {
                    p.draw(rng)
                } else {
                    0
                }
            }
            Kind::Weibull(ln_q, inv_beta) => {
                (open_unit(rng).ln() / ln_q).powf(*inv_beta).floor() as i64
            }
            Kind::ZeroModified(p0, p) => {
                if rng.random::<f64>() < *p0 {
                    0
                } else {
                    zero_truncated(p, rng)
                }
            }
            Kind::ZeroTruncated(p) => zero_truncated(p, rng),
            Kind::Table(t) => t.draw(rng),
        }
    }

    pub fn draw_values<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<i64> {
        (0..n).map(|_| self.draw_one(rng)).collect()
    }
}

fn zero_truncated<R: Rng + ?Sized>(p: &PoissonSampler, rng: &mut R) -> i64 {
    loop {
        let v = p.draw(rng);
        if v > 0 {
            return v;
        }
    }
}

/// Draws `n` i.i.d. values from `spec` using the stream `rng`.
pub fn draw(spec: &AltDistSpec, n: usize, rng: &RandomStream) -> Result<Sample> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    let sampler = spec.sampler()?;
    Sample::new(sampler.draw_values(n, &mut rng.rng()))
}
