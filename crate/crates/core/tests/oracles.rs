//! Closed-form statistics and objectives against independent evaluations:
//! naive level sums, numerical quadrature and direct definitions.

use discrete_stein::estimate::{s_nb, s_pe};
use discrete_stein::gof::{competitor, tn_po, GofStatistic};
use discrete_stein::Sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ_{k >= k0} (n⁻¹ Σ_j a(X_j) 1{X_j >= k} − ρ̂_n(k))²`, summed level by level
/// over the raw observations.
fn level_sum(values: &[i64], k0: i64, a: impl Fn(i64) -> f64) -> f64 {
    let n = values.len() as f64;
    let max = *values.iter().max().unwrap();
    (k0..=max + 1)
        .map(|k| {
            let e: f64 = values.iter().filter(|&&x| x >= k).map(|&x| a(x)).sum::<f64>() / n;
            let r = values.iter().filter(|&&x| x == k).count() as f64 / n;
            (e - r).powi(2)
        })
        .sum()
}

fn random_values(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Vec<i64> {
    let n = rng.random_range(1..=30);
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-10 * b.abs().max(1.0)
}

#[test]
fn tn_po_double_sum_equals_level_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let values = random_values(&mut rng, 0, 25);
        let lambda = values.iter().sum::<i64>() as f64 / values.len() as f64;
        let oracle = level_sum(&values, 0, |x| 1.0 - lambda / (x as f64 + 1.0));
        let got = tn_po(&Sample::new(values.clone()).unwrap());
        assert!(close(got, oracle), "{values:?}: {got} vs {oracle}");
    }
}

#[test]
fn s_nb_double_sum_equals_level_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let values = random_values(&mut rng, 0, 40);
        let r = rng.random_range(0.05..50.0);
        let q = rng.random_range(0.01..0.99);
        let oracle = level_sum(&values, 0, |x| 1.0 - (r + x as f64) / (x as f64 + 1.0) * (1.0 - q));
        let got = s_nb(&Sample::new(values.clone()).unwrap(), r, q).unwrap();
        assert!(close(got, oracle), "{values:?} r={r} q={q}: {got} vs {oracle}");
    }
}

#[test]
fn s_pe_double_sum_equals_level_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let values = random_values(&mut rng, 1, 6);
        let t1: f64 = rng.random_range(-1.0..1.0);
        let t3: f64 = rng.random_range(-1.0..-0.01);
        let oracle = level_sum(&values, 1, |x| {
            let x = x as f64;
            1.0 - (t1 + t3 * ((x + 1.0).powi(3) - x.powi(3))).exp()
        });
        let got = s_pe(&Sample::new(values.clone()).unwrap(), &[t1, 0.0, t3]).unwrap();
        assert!(close(got, oracle), "{values:?}: {got} vs {oracle}");
    }
}

#[test]
fn s_pe_general_degree_equals_level_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let values = random_values(&mut rng, 1, 5);
        let theta = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.5..-0.01),
        ];
        let oracle = level_sum(&values, 1, |x| {
            let x = x as f64;
            let exponent: f64 = theta
                .iter()
                .enumerate()
                .map(|(i, t)| t * ((x + 1.0).powi(i as i32 + 1) - x.powi(i as i32 + 1)))
                .sum();
            1.0 - exponent.exp()
        });
        let got = s_pe(&Sample::new(values.clone()).unwrap(), &theta).unwrap();
        assert!(close(got, oracle), "{values:?}: {got} vs {oracle}");
    }
}

/// Composite Gauss–Legendre (5 nodes) on `[0, 1]` with `panels` panels.
fn integrate(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683,
        0.538_469_310_105_683,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    let h = 1.0 / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * h;
            NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

fn pgf(values: &[i64], t: f64) -> f64 {
    values.iter().map(|&x| t.powi(x as i32)).sum::<f64>() / values.len() as f64
}

fn pgf_derivative(values: &[i64], t: f64) -> f64 {
    values
        .iter()
        .filter(|&&x| x > 0)
        .map(|&x| x as f64 * t.powi(x as i32 - 1))
        .sum::<f64>()
        / values.len() as f64
}

#[test]
fn bh_equals_integrated_pgf_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..50 {
        let values = random_values(&mut rng, 0, 15);
        let n = values.len() as f64;
        let lambda = values.iter().sum::<i64>() as f64 / n;
        let oracle = n * integrate(
            |t| (pgf_derivative(&values, t) - lambda * pgf(&values, t)).powi(2),
            400,
        );
        let got = competitor(GofStatistic::BH, &Sample::new(values.clone()).unwrap()).unwrap();
        assert!((got - oracle).abs() < 1e-8 * oracle.max(1.0), "{values:?}: {got} vs {oracle}");
    }
}

#[test]
fn ru_equals_integrated_pgf_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let mut values = random_values(&mut rng, 0, 30);
        values.push(rng.random_range(1..=30));
        let n = values.len() as f64;
        let lambda = values.iter().sum::<i64>() as f64 / n;
        let oracle = n * integrate(|t| (pgf(&values, t) - (lambda * (t - 1.0)).exp()).powi(2), 400);
        let got = competitor(GofStatistic::RU, &Sample::new(values.clone()).unwrap()).unwrap();
        assert!((got - oracle).abs() < 1e-8 * oracle.max(1.0), "{values:?}: {got} vs {oracle}");
    }
}

fn poisson_cdf(lambda: f64, k: i64) -> f64 {
    let mut p = (-lambda).exp();
    let mut acc = p;
    for j in 1..=k {
        p *= lambda / j as f64;
        acc += p;
    }
    acc.min(1.0)
}

#[test]
fn distribution_function_statistics_match_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let mut values = random_values(&mut rng, 0, 12);
        values.push(rng.random_range(1..=12));
        let n = values.len() as f64;
        let lambda = values.iter().sum::<i64>() as f64 / n;
        let fhat = |k: i64| values.iter().filter(|&&x| x <= k).count() as f64 / n;
        let diff = |k: i64| fhat(k) - poisson_cdf(lambda, k);
        let far = 200;
        let k1 = n.sqrt() * (0..far).map(|k| diff(k).abs()).sum::<f64>();
        let ks = n.sqrt() * (0..far).map(|k| diff(k).abs()).fold(0.0, f64::max);
        let k2 = n.sqrt()
            * (1..far)
                .map(|k| (0..k).map(diff).sum::<f64>().abs())
                .fold(0.0, f64::max);
        let cm = values.iter().map(|&x| diff(x).powi(2)).sum::<f64>();
        let sample = Sample::new(values.clone()).unwrap();
        let got = |s| competitor(s, &sample).unwrap();
        assert!((got(GofStatistic::K1) - k1).abs() < 1e-9, "K1 {values:?}");
        assert!((got(GofStatistic::KS) - ks).abs() < 1e-12, "KS {values:?}");
        assert!((got(GofStatistic::CM) - cm).abs() < 1e-12, "CM {values:?}");
        // Past the sample maximum the partial sums only shrink in modulus.
        assert!((got(GofStatistic::K2) - k2).abs() < 1e-12, "K2 {values:?}");
    }
}

#[test]
fn sr_vanishes_in_the_population_limit() {
    // A "sample" whose frequencies are Po(3) probabilities rounded to 1e-6
    // has M̂ ≈ F everywhere, so SR/n is tiny.
    let lambda: f64 = 3.0;
    let mut values = Vec::new();
    let mut p = (-lambda).exp();
    for k in 0..25_i64 {
        if k > 0 {
            p *= lambda / k as f64;
        }
        values.extend(std::iter::repeat_n(k, (p * 1e6).round() as usize));
    }
    let sample = Sample::new(values).unwrap();
    let sr = competitor(GofStatistic::SR, &sample).unwrap() / sample.len() as f64;
    assert!(sr < 1e-10, "{sr}");
}
