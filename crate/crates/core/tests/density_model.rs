//! Measurement densities, model parameters, edge weights, and the
//! detectability threshold, checked against closed forms and an independent
//! quadrature oracle.

mod common;

use proptest::prelude::*;
use spclust::density::MeasurementDensity;
use spclust::model::{critical_degree, critical_degree_pair, weight, ModelParams};
use spclust::Error;

const CLOSED_FORM_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-6;

fn censored_densities(eps: f64) -> (MeasurementDensity, MeasurementDensity) {
    (
        MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![1.0 - eps, eps],
        },
        MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![eps, 1.0 - eps],
        },
    )
}

#[test]
fn censored_threshold_matches_closed_form() {
    // Two groups: flipping each sign with probability eps puts the
    // threshold at (1 − 2·eps)^{-2}.
    for eps in [0.0, 0.05, 0.1, 0.25, 0.4] {
        let params = ModelParams::censored(2, 3.0, eps).unwrap();
        let expected = (1.0 - 2.0 * eps).powi(-2);
        let got = critical_degree(&params).unwrap();
        assert!(
            (got - expected).abs() <= CLOSED_FORM_TOL,
            "eps={eps}: {got} vs {expected}"
        );
    }
    // General k: the two-symbol sum
    // 1/alpha_c = (1/k)(1−2eps)^2 [ 1/(1−eps+(k−1)eps) + 1/(eps+(k−1)(1−eps)) ].
    for k in [3usize, 5] {
        for eps in [0.0, 0.1, 0.3] {
            let params = ModelParams::censored(k, 3.0, eps).unwrap();
            let kf = k as f64;
            let inv = (1.0 - 2.0 * eps).powi(2) / kf
                * (1.0 / (1.0 - eps + (kf - 1.0) * eps)
                    + 1.0 / (eps + (kf - 1.0) * (1.0 - eps)));
            let expected = 1.0 / inv;
            let got = critical_degree(&params).unwrap();
            assert!(
                (got - expected).abs() <= CLOSED_FORM_TOL * expected,
                "k={k} eps={eps}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn censored_threshold_matches_quadrature_oracle() {
    for eps in [0.05, 0.1, 0.25] {
        let params = ModelParams::censored(2, 3.0, eps).unwrap();
        let (p_in, p_out) = censored_densities(eps);
        let oracle = common::threshold_oracle(&p_in, &p_out, 2);
        let got = critical_degree(&params).unwrap();
        assert!(
            (got - oracle).abs() <= ORACLE_TOL * oracle,
            "eps={eps}: {got} vs oracle {oracle}"
        );
    }
}

#[test]
fn gaussian_threshold_matches_quadrature_oracle() {
    for (k, mean_in, mean_out, var) in [
        (2usize, 1.5, 0.0, 1.0),
        (3, 1.5, 0.0, 1.0),
        (2, 2.0, -1.0, 0.5),
    ] {
        let params = ModelParams::gaussian_pair(k, 3.0, mean_in, mean_out, var).unwrap();
        let p_in = MeasurementDensity::Gaussian {
            mean: mean_in,
            variance: var,
        };
        let p_out = MeasurementDensity::Gaussian {
            mean: mean_out,
            variance: var,
        };
        let oracle = common::threshold_oracle(&p_in, &p_out, k);
        let got = critical_degree(&params).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-4 * oracle,
            "k={k}: {got} vs oracle {oracle}"
        );
    }
}

#[test]
fn unit_separation_gaussian_threshold_value() {
    // Means 1.5 apart at unit variance, two groups: the threshold sits at
    // 2.63 mean measurements per item.
    let params = ModelParams::gaussian_pair(2, 3.0, 1.5, 0.0, 1.0).unwrap();
    let got = critical_degree(&params).unwrap();
    assert!((got - 2.63).abs() <= 0.01, "got {got}");
}

#[test]
fn censored_weight_closed_form_and_range() {
    // w(s) = (p_in(s) − p_out(s)) / (p_in(s) + (k−1) p_out(s)).
    for k in [2usize, 4] {
        for eps in [0.05, 0.1, 0.3] {
            let params = ModelParams::censored(k, 3.0, eps).unwrap();
            let w_plus = params.weight(1.0).unwrap();
            let w_minus = params.weight(-1.0).unwrap();
            let expect_plus = (1.0 - 2.0 * eps) / (1.0 - eps + (k as f64 - 1.0) * eps);
            let expect_minus = (2.0 * eps - 1.0) / (eps + (k as f64 - 1.0) * (1.0 - eps));
            assert!((w_plus - expect_plus).abs() <= CLOSED_FORM_TOL);
            assert!((w_minus - expect_minus).abs() <= CLOSED_FORM_TOL);
            let lo = -1.0 / (k as f64 - 1.0);
            for w in [w_plus, w_minus] {
                assert!(w >= lo - CLOSED_FORM_TOL && w <= 1.0 + CLOSED_FORM_TOL);
            }
        }
    }
}

#[test]
fn identical_in_out_densities_have_infinite_threshold() {
    // The pairwise threshold routine accepts identical densities directly
    // (the full model constructor rejects them) and reports no finite
    // threshold.
    let p = MeasurementDensity::Gaussian {
        mean: 0.0,
        variance: 1.0,
    };
    let got = critical_degree_pair(&p, &p, 2).unwrap();
    assert!(got.is_infinite() && got > 0.0, "got {got}");
}

#[test]
fn general_model_has_no_scalar_weight() {
    let g = |mean: f64| MeasurementDensity::Gaussian {
        mean,
        variance: 1.0,
    };
    let table = vec![vec![g(2.0), g(0.0)], vec![g(0.0), g(1.0)]];
    let params = ModelParams::general(2, 3.0, table).unwrap();
    assert!(matches!(params.weight(0.5), Err(Error::UnsupportedModel)));
}

#[test]
fn flip_probability_half_is_rejected() {
    assert!(matches!(
        ModelParams::censored(2, 3.0, 0.5),
        Err(Error::InvalidModel(_))
    ));
}

#[test]
fn gaussian_eval_matches_formula() {
    let d = MeasurementDensity::Gaussian {
        mean: 1.5,
        variance: 0.7,
    };
    for s in [-2.0f64, 0.0, 1.5, 3.3] {
        let expect = (-0.5 * (s - 1.5) * (s - 1.5) / 0.7).exp()
            / (2.0 * std::f64::consts::PI * 0.7).sqrt();
        assert!((d.eval(s) - expect).abs() <= 1e-14);
    }
}

#[test]
fn binned_density_evaluates_per_bin_mass() {
    // A binned density reports the mass of the containing bin (bin widths
    // cancel in every weight ratio and in the threshold integral, so masses
    // are the consistent currency throughout).
    let d = MeasurementDensity::Binned {
        edges: vec![0.0, 1.0, 3.0],
        masses: vec![0.25, 0.75],
    };
    d.validate().unwrap();
    assert!((d.eval(0.5) - 0.25).abs() <= 1e-15);
    assert!((d.eval(2.0) - 0.75).abs() <= 1e-15);
    assert_eq!(d.eval(-0.1), 0.0);
    assert_eq!(d.eval(3.1), 0.0);
}

#[test]
fn weight_of_explicit_density_pair() {
    let (p_in, p_out) = censored_densities(0.1);
    let w = weight(&p_in, &p_out, 2, 1.0).unwrap();
    assert!((w - 0.8).abs() <= CLOSED_FORM_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Discrete sampling stays on the declared support and eval is positive
    /// there.
    #[test]
    fn discrete_sample_on_support(seed in 0u64..1000, raw in prop::collection::vec(0.05f64..1.0, 2..5)) {
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let symbols: Vec<f64> = (0..probs.len()).map(|t| t as f64).collect();
        let d = MeasurementDensity::Discrete { symbols: symbols.clone(), probs };
        d.validate().unwrap();
        let mut rng = spclust::new_rng(seed);
        for _ in 0..20 {
            let s = d.sample(&mut rng);
            prop_assert!(symbols.contains(&s));
            prop_assert!(d.eval(s) > 0.0);
        }
    }

    /// The symmetric-model weight always lies in [−1/(k−1), 1] wherever it
    /// is defined.
    #[test]
    fn weight_range_property(
        k in 2usize..5,
        mean_in in -1.0f64..2.0,
        mean_out in -1.0f64..2.0,
        s in -4.0f64..4.0,
    ) {
        prop_assume!((mean_in - mean_out).abs() > 1e-3);
        let params = ModelParams::gaussian_pair(k, 3.0, mean_in, mean_out, 1.0).unwrap();
        let w = params.weight(s).unwrap();
        let lo = -1.0 / (k as f64 - 1.0);
        prop_assert!(w >= lo - 1e-12 && w <= 1.0 + 1e-12, "w = {w}");
    }
}
