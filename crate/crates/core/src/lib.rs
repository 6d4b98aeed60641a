//! Stein-type characterizations of discrete probability laws and the
//! statistical procedures built on them.
//!
//! The central identity is, for a mass function `p` on `{L, ..., R}`,
//!
//! ```text
//! P(X = k) = E[ -(Δ⁺p(X) / p(X)) · 1{X >= k} ],   k >= L,
//! ```
//!
//! which holds if and only if `X ~ p`. The ratio `Δ⁺p / p` never involves the
//! normalizing constant of `p`, which makes the identity usable for
//! non-normalized models.
//!
//! * [`models`]: distribution families, score ratios, regularity checks.
//! * [`characterize`]: both sides of each characterizing identity.
//! * [`gof`]: the Poisson goodness-of-fit statistic, competitors and the
//!   parametric bootstrap.
//! * [`estimate`]: minimum-distance estimation for the negative binomial and
//!   exponential-polynomial families, plus moment and homogeneous-divergence
//!   baselines.
//! * [`optimize`]: box-constrained minimization.
//! * [`sampling`]: reproducible random streams and samplers.

pub mod characterize;
pub mod error;
pub mod estimate;
pub mod gof;
pub mod models;
pub mod optimize;
pub mod sample;
pub mod sampling;

pub use error::{Error, Result};
pub use models::{DiscreteModel, SupportRange};
pub use sample::Sample;
pub use sampling::{AltDistSpec, RandomStream};

/// Parses a comma-separated `key=value` parameter list such as
/// `lambda=5`, `q=2/3` or `theta=0.5,0,-0.2`. Values that do not start with a key
/// continue the previous key's list.
pub(crate) fn parse_params(spec: &str, body: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let perr = |reason: String| Error::Parse {
        spec: spec.to_string(),
        reason,
    };
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for token in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (key, value) = match token.split_once('=') {
            Some((k, v)) => (Some(k.trim().to_ascii_lowercase()), v.trim()),
            None => (None, token),
        };
        let value = parse_number(value).ok_or_else(|| perr(format!("`{value}` is not a number")))?;
        match key {
            Some(k) => out.push((k, vec![value])),
            None => match out.last_mut() {
                Some((_, vals)) => vals.push(value),
                None => return Err(perr("value without a key".into())),
            },
        }
    }
    Ok(out)
}

/// A decimal number or a fraction `a/b`.
pub(crate) fn parse_number(text: &str) -> Option<f64> {
    match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => text.parse().ok(),
    }
}

pub(crate) fn take_param(
    spec: &str,
    params: &[(String, Vec<f64>)],
    names: &[&str],
) -> Result<f64> {
    params
        .iter()
        .find(|(k, v)| names.contains(&k.as_str()) && v.len() == 1)
        .map(|(_, v)| v[0])
        .ok_or_else(|| Error::Parse {
            spec: spec.to_string(),
            reason: format!("missing scalar parameter `{}`", names[0]),
        })
}
