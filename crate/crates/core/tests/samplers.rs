use discrete_stein::sampling::draw;
use discrete_stein::{AltDistSpec, RandomStream};

/// Pearson chi-square against the exact pmf, pooling cells with expected
/// count below 5.
fn chi_square(spec: &AltDistSpec, values: &[i64]) -> (f64, usize) {
    let n = values.len() as f64;
    let max = *values.iter().max().unwrap();
    let mut counts = vec![0usize; max as usize + 1];
    for &v in values {
        counts[v as usize] += 1;
    }
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &c) in counts.iter().enumerate() {
        obs += c as f64;
        exp += n * spec.pmf(k as i64);
        if exp >= 5.0 {
            stat += (obs - exp).powi(2) / exp;
            cells += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    // Remaining tail mass beyond the sample maximum joins the last cell.
    let tail = n - (0..=max).map(|k| n * spec.pmf(k)).sum::<f64>();
    exp += tail.max(0.0);
    if exp > 0.0 {
        stat += (obs - exp).powi(2) / exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1).max(1))
}

#[test]
fn every_table_row_samples_its_pmf() {
    for (i, spec) in AltDistSpec::table1_rows().into_iter().enumerate() {
        let sample = draw(&spec, 20_000, &RandomStream::new(99).substream(i as u64)).unwrap();
        let (stat, df) = chi_square(&spec, sample.values());
        // Far beyond the 0.9999 quantile for these degrees of freedom.
        let bound = df as f64 + 8.0 * (2.0 * df as f64).sqrt() + 20.0;
        assert!(stat < bound, "{spec}: chi2 = {stat} on {df} df");
        let se = (sample.variance() / sample.len() as f64).sqrt();
        assert!((sample.mean() - spec.mean()).abs() < 6.0 * se + 1e-12, "{spec}: mean {}", sample.mean());
    }
}

#[test]
fn extra_families_sample_their_pmf() {
    for spec in [
        AltDistSpec::NegBinomial { r: 2.0, q: 0.25 },
        AltDistSpec::NegBinomial { r: 30.0, q: 0.9 },
        AltDistSpec::ExpPoly { theta: vec![0.5, 0.0, -0.2] },
    ] {
        let sample = draw(&spec, 20_000, &RandomStream::new(5)).unwrap();
        let (stat, df) = chi_square(&spec, sample.values());
        assert!(stat < df as f64 + 8.0 * (2.0 * df as f64).sqrt() + 20.0, "{spec}: {stat} on {df}");
    }
}

#[test]
fn draws_are_reproducible() {
    let spec: AltDistSpec = "pp:q=0.25,t1=1,t2=5".parse().unwrap();
    let a = draw(&spec, 500, &RandomStream::new(3).substream(7)).unwrap();
    let b = draw(&spec, 500, &RandomStream::new(3).substream(7)).unwrap();
    let c = draw(&spec, 500, &RandomStream::new(3).substream(8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
