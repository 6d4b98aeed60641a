use std::f64::consts::PI;

use discrete_stein::characterize::*;
use discrete_stein::models::{check_c2, GibbsParams};
use discrete_stein::{DiscreteModel, Error, Sample};

fn models() -> Vec<(&'static str, DiscreteModel)> {
    vec![
        ("Po(1)", DiscreteModel::poisson(1.0).unwrap()),
        ("Po(5)", DiscreteModel::poisson(5.0).unwrap()),
        ("NB(2,0.5)", DiscreteModel::neg_binomial(2.0, 0.5).unwrap()),
        ("Bin(10,0.3)", DiscreteModel::binomial(10, 0.3).unwrap()),
        ("U(6)", DiscreteModel::uniform(6).unwrap()),
        ("EP(0.5,0,-0.2)", DiscreteModel::exp_poly(vec![0.5, 0.0, -0.2]).unwrap()),
        (
            "Gibbs(5)",
            DiscreteModel::gibbs(
                vec![0.3, -0.1, 0.8, 0.2, -0.4],
                vec![1, 2, 2, 3, 1],
                GibbsParams {
                    mu: 0.2,
                    temperature: 1.5,
                    kappa: 1.0,
                },
            )
            .unwrap(),
        ),
    ]
}

fn t_grid() -> Vec<f64> {
    (0..20).map(|i| -PI + 2.0 * PI * i as f64 / 19.0).collect()
}

fn s_grid() -> Vec<f64> {
    (0..9).map(|i| i as f64 / 9.0).collect()
}

#[test]
fn every_applicable_identity_holds() {
    for (name, model) in models() {
        let k_max = model.support().upper().unwrap_or(60);
        let r = pmf_identity_residual(&model, k_max).unwrap();
        assert!(r.sup_abs < 1e-10, "{name} pmf {}", r.sup_abs);
        let r = cdf_identity_residual(&model, k_max).unwrap();
        assert!(r.sup_abs < 1e-10, "{name} cdf {}", r.sup_abs);
        let r = cf_identity_residual(&model, &t_grid()).unwrap();
        assert!(r.sup_abs < 1e-10, "{name} cf {}", r.sup_abs);
        if model.support().lower() == 0 && !model.support().is_finite() {
            let r = pgf_identity_residual(&model, &s_grid()).unwrap();
            assert!(r.sup_abs < 1e-10, "{name} pgf {}", r.sup_abs);
        } else {
            assert!(matches!(
                pgf_identity_residual(&model, &s_grid()),
                Err(Error::Unsupported(_))
            ));
        }
        if model.support().is_finite() {
            let r = backward_identity_residual(&model).unwrap();
            assert!(r.sup_abs < 1e-10, "{name} backward {}", r.sup_abs);
        }
    }
}

#[test]
fn wrong_law_breaks_the_pmf_identity() {
    let model = DiscreteModel::poisson(2.0).unwrap();
    let other = DiscreteModel::poisson(3.0).unwrap();
    let law = Law::from_model(&other);
    let r = pmf_identity_residual_for(&model, &law, 30).unwrap();
    assert!(r.sup_abs > 1e-3, "{}", r.sup_abs);
    let r = cf_identity_residual_for(&model, &law, &t_grid()).unwrap();
    assert!(r.sup_abs > 1e-3, "{}", r.sup_abs);
}

#[test]
fn stein_operator_is_centred_under_the_model() {
    for (name, model) in models() {
        for m in [model.support().lower(), model.support().lower() + 2] {
            let f = make_fm(&model, m).unwrap();
            let total = stein_operator_expectation(&model, &*f, &model_pmf(&model)).unwrap();
            assert!(total.abs() < 1e-10, "{name} m={m}: {total}");
        }
    }
}

fn model_pmf(model: &DiscreteModel) -> impl Fn(i64) -> f64 + '_ {
    move |k| model.pmf(k)
}

#[test]
fn empirical_sides_converge_for_a_large_poisson_sample() {
    let model = DiscreteModel::poisson(2.0).unwrap();
    let lambda: f64 = 2.0;
    let mut values = Vec::new();
    let mut p = (-lambda).exp();
    for k in 0..20_i64 {
        if k > 0 {
            p *= lambda / k as f64;
        }
        values.extend(std::iter::repeat_n(k, (p * 1e6).round() as usize));
    }
    let sample = Sample::new(values).unwrap();
    for k in 0..8 {
        let lhs = empirical_pmf(&sample, k);
        let rhs = empirical_expectation_side(&sample, &model, k).unwrap();
        assert!((lhs - rhs).abs() < 1e-5, "k={k}: {lhs} vs {rhs}");
    }
}

#[test]
fn regularity_diagnostic_is_finite_for_light_tails() {
    for (name, model) in models() {
        let report = check_c2(&model, 400).unwrap();
        assert!(report.sup.is_finite() && report.stabilized, "{name}: {report:?}");
    }
}
