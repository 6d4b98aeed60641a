//! Immutable integer samples with cached summaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A non-empty sample of nonnegative integers. Distinct values are kept in
/// ascending order with their multiplicities, which is what every double-sum
/// statistic iterates over.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<i64>,
    distinct: Vec<i64>,
    counts: Vec<usize>,
    mean: f64,
    variance: f64,
}

impl Sample {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("a sample needs at least one value".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v < 0) {
            return Err(Error::Domain(format!("sample values must be >= 0, got {v}")));
        }
        let mut sorted = values.clone();
        sorted.sort_unstable();
        let mut distinct = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            if distinct.last() == Some(&v) {
                *counts.last_mut().expect("non-empty") += 1;
            } else {
                distinct.push(v);
                counts.push(1);
            }
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let variance = values
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        Ok(Self {
            values,
            distinct,
            counts,
            mean,
            variance,
        })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct values in ascending order.
    pub fn distinct(&self) -> &[i64] {
        &self.distinct
    }

    /// Multiplicity of each entry of [`Sample::distinct`].
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance with divisor `n`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn max(&self) -> i64 {
        *self.distinct.last().expect("non-empty")
    }

    pub fn min(&self) -> i64 {
        self.distinct[0]
    }

    /// Number of observations equal to `k`.
    pub fn count_of(&self, k: i64) -> usize {
        self.distinct
            .binary_search(&k)
            .map_or(0, |i| self.counts[i])
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Sample {
    type Err = Error;

    /// One integer per line; blank lines and `#` comments are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: i64 = line.parse().map_err(|_| Error::Parse {
                spec: format!("line {}", i + 1),
                reason: format!("`{line}` is not an integer"),
            })?;
            if v < 0 {
                return Err(Error::Parse {
                    spec: format!("line {}", i + 1),
                    reason: format!("negative value {v}"),
                });
            }
            values.push(v);
        }
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summaries() {
        let s = Sample::new(vec![3, 1, 1, 0, 5]).unwrap();
        assert_eq!(s.distinct(), &[0, 1, 3, 5]);
        assert_eq!(s.counts(), &[1, 2, 1, 1]);
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.variance(), (4.0 + 1.0 + 1.0 + 1.0 + 9.0) / 5.0);
        assert_eq!(s.max(), 5);
        assert_eq!(s.count_of(1), 2);
        assert_eq!(s.count_of(2), 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1, -2]).is_err());
        assert!("1\n\n# comment\n2 # trailing\n".parse::<Sample>().is_ok());
        let err = "1\nx\n".parse::<Sample>().unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!("".parse::<Sample>().is_err());
    }

    proptest! {
        #[test]
        fn cached_moments_match_recomputation(values in prop::collection::vec(0i64..50, 1..100)) {
            let s = Sample::new(values.clone()).unwrap();
            let n = values.len() as f64;
            let mean = values.iter().sum::<i64>() as f64 / n;
            let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((s.mean() - mean).abs() < 1e-12);
            prop_assert!((s.variance() - var).abs() < 1e-12 * var.max(1.0));
            prop_assert_eq!(s.counts().iter().sum::<usize>(), values.len());
        }
    }
}
