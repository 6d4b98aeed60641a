use discrete_stein::estimate::*;
use discrete_stein::models::normalizer_evaluations;
use discrete_stein::optimize::OptimizerConfig;
use discrete_stein::sampling::draw;
use discrete_stein::{AltDistSpec, RandomStream};

const SEEDS: u64 = 100;

#[test]
fn s_nb_is_smaller_at_the_truth() {
    let spec = AltDistSpec::NegBinomial { r: 2.0, q: 0.25 };
    let wins = (0..SEEDS)
        .filter(|&j| {
            let s = draw(&spec, 2000, &RandomStream::new(31).substream(j)).unwrap();
            s_nb(&s, 2.0, 0.25).unwrap() < s_nb(&s, 3.0, 0.25).unwrap()
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn s_pe_is_smaller_at_the_truth() {
    let spec = AltDistSpec::ExpPoly { theta: vec![0.5, 0.0, -0.2] };
    let wins = (0..SEEDS)
        .filter(|&j| {
            let s = draw(&spec, 2000, &RandomStream::new(32).substream(j)).unwrap();
            s_pe(&s, &[0.5, 0.0, -0.2]).unwrap() < s_pe(&s, &[1.0, 0.0, -0.2]).unwrap()
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn negative_binomial_estimate_is_consistent() {
    let spec = AltDistSpec::NegBinomial { r: 2.0, q: 0.25 };
    let opt = OptimizerConfig::default();
    let hits = (0..SEEDS)
        .filter(|&j| {
            let s = draw(&spec, 2000, &RandomStream::new(33).substream(j)).unwrap();
            let fit = estimate_nb(&s, &opt, &RandomStream::new(34).substream(j)).unwrap();
            assert!(fit.in_bounds);
            (fit.params[1] - 0.25).abs() < 0.05
        })
        .count();
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn objective_is_reported_at_the_returned_parameters() {
    let s = draw(&AltDistSpec::NegBinomial { r: 5.0, q: 0.5 }, 100, &RandomStream::new(35)).unwrap();
    let fit = estimate_nb(&s, &OptimizerConfig::default(), &RandomStream::new(36)).unwrap();
    assert!((fit.objective - s_nb(&s, fit.params[0], fit.params[1]).unwrap()).abs() < 1e-12);

    let s = draw(&AltDistSpec::ExpPoly { theta: vec![0.5, 0.0, -0.2] }, 100, &RandomStream::new(37)).unwrap();
    let fit = estimate_exppoly(&s, 3, &[(2, 0.0)], &OptimizerConfig::default(), &RandomStream::new(38)).unwrap();
    assert!((fit.objective - s_pe(&s, &fit.params).unwrap()).abs() < 1e-12);
    assert!(fit.params[2] <= LAST_COEFF_MAX);
}

/// `ϑ₃` is pinned down well at `n = 2000`. For `ϑ₁` the Cramér–Rao bound
/// alone gives a standard deviation near 0.13 at this size (the data are
/// mostly 1s and 2s), so its band is four times that.
#[test]
fn exponential_polynomial_estimate_is_consistent() {
    let spec = AltDistSpec::ExpPoly { theta: vec![0.5, 0.0, -0.2] };
    let opt = OptimizerConfig::default();
    let before = normalizer_evaluations();
    let mut fits = Vec::new();
    for j in 0..SEEDS {
        let s = draw(&spec, 2000, &RandomStream::new(39).substream(j)).unwrap();
        let start = normalizer_evaluations();
        let fit = estimate_exppoly(&s, 3, &[(2, 0.0)], &opt, &RandomStream::new(40).substream(j)).unwrap();
        assert_eq!(normalizer_evaluations(), start, "the estimator touched the normalizer");
        fits.push(fit);
    }
    // Sampling needs the normalizer, so the counter is live.
    assert!(normalizer_evaluations() > before);
    let t3 = fits.iter().filter(|f| (f.params[2] + 0.2).abs() < 0.1).count();
    let t1 = fits.iter().filter(|f| (f.params[0] - 0.5).abs() < 0.52).count();
    assert!(t3 >= 90, "θ3 within 0.1 in {t3}/100");
    assert!(t1 >= 90, "θ1 within 0.52 in {t1}/100");
}

#[test]
fn homogeneous_divergence_estimator_avoids_the_normalizer() {
    let spec = AltDistSpec::ExpPoly { theta: vec![0.5, 0.0, -0.2] };
    let s = draw(&spec, 500, &RandomStream::new(41)).unwrap();
    let start = normalizer_evaluations();
    let fit = estimate_exppoly_hd(
        &s,
        3,
        &[(2, 0.0)],
        &OptimizerConfig::default(),
        &HdConstants::default(),
        &RandomStream::new(42),
    )
    .unwrap();
    assert_eq!(normalizer_evaluations(), start);
    assert!(fit.in_bounds && fit.params[1] == 0.0);
}

#[test]
fn multi_start_never_does_worse_than_its_first_start() {
    let s = draw(&AltDistSpec::NegBinomial { r: 30.0, q: 0.9 }, 100, &RandomStream::new(43)).unwrap();
    let opt = OptimizerConfig::default();
    let rng = RandomStream::new(44);
    let one = estimate_nb_with(&s, &nb_default_bounds(), 1, &opt, &rng).unwrap();
    let five = estimate_nb_with(&s, &nb_default_bounds(), 5, &opt, &rng).unwrap();
    assert!(five.objective <= one.objective);
}
