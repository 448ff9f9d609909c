//! Values checked against independent computations. Frozen constants
//! were produced with 40-digit mpmath arithmetic (normal CDF, quadratic
//! forms, gamma quantiles by bisection on the regularized incomplete
//! gamma) and with statsmodels' Newton logistic fit.

use fairacq::auc::{binormal_auc, empirical_auc, fld_auc, pair_auc, unconditional_variance};
use fairacq::bounds::{improvement_bound, lemma_lower_bound, BoundInputs};
use fairacq::datagen::{gamma_quantile_at_normal, GammaParams};
use fairacq::moments::ClassStats;
use fairacq::noisy::auc_with_noise;
use fairacq::numkit::phi;
use fairacq::scoring::{fit_logistic, LogisticOptions};
use fairacq::{Binormal1D, Group, GroupedColumns, SymMatrix};

fn close(got: f64, want: f64, rel: f64) {
    assert!(
        (got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE),
        "got {got:e}, want {want:e}"
    );
}

#[test]
fn normal_cdf_matches_high_precision() {
    let table = [
        (-10.0, 7.619853024160525e-24),
        (-5.0, 2.866515718791939e-07),
        (-1.5, 0.06680720126885807),
        (-0.3, 0.3820885778110474),
        (0.2, 0.579259709439103),
        (1.0, 0.8413447460685429),
        (2.5, 0.9937903346742238),
        (6.0, 0.9999999990134123),
        (9.0, 1.0),
    ];
    for (x, want) in table {
        close(phi(x), want, 4e-15);
    }
}

#[test]
fn fld_auc_three_dim() {
    let s0 = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.1], vec![0.3, 2.0, -0.4], vec![0.1, -0.4, 1.5]]).unwrap();
    let s1 = SymMatrix::from_rows(&[vec![1.2, 0.0, 0.2], vec![0.0, 1.0, 0.1], vec![0.2, 0.1, 0.8]]).unwrap();
    let st = ClassStats::from_moments(vec![0.0; 3], vec![0.5, -0.3, 0.8], s0, s1);
    close(fld_auc(&st, 0.0).unwrap(), 0.7294627701982278, 1e-14);
}

#[test]
fn pair_and_noisy_auc() {
    let st = ClassStats::pair_from_sums(0.7, 0.4, 1.1, 2.0, 0.3);
    close(pair_auc(&st, 0.0).unwrap(), 0.7531025032007245, 1e-14);
    close(auc_with_noise(&st, 0.6, 0.0).unwrap(), 0.751428303851572, 1e-14);
}

#[test]
fn lemma_bound_value() {
    close(lemma_lower_bound(0.2, 0.5), 0.0181577979041338, 1e-14);
    let b = BoundInputs {
        gamma: 0.25,
        beta: 0.5,
        delta: 0.5,
        feature: 0,
    };
    // 0.25 · 0.125 · 0.25 · 0.25
    assert_eq!(improvement_bound(&b), 0.001953125);
}

#[test]
fn gamma_quantiles() {
    let p = GammaParams { shape: 2.0, rate: 0.5 };
    for (z, want) in [
        (-2.0, 0.46028955041518393),
        (0.0, 3.356693980033321),
        (1.3, 7.861109589669511),
        (4.0, 25.99818821487474),
    ] {
        close(gamma_quantile_at_normal(p, z), want, 1e-12);
    }
}

#[test]
fn logistic_matches_reference_fit() {
    let x = [
        [0.1, 1.2],
        [-0.5, 0.3],
        [1.4, -0.7],
        [0.8, 0.9],
        [-1.1, -0.2],
        [0.3, 2.1],
        [2.0, 0.4],
        [-0.7, -1.5],
        [0.5, 0.5],
        [-0.2, 1.8],
        [1.1, -1.2],
        [-1.6, 0.6],
        [0.9, 1.5],
        [0.0, -0.4],
        [1.7, 1.1],
        [-0.9, 0.2],
    ];
    let y = vec![0, 0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 0, 1, 1];
    let cols = vec![x.iter().map(|r| r[0]).collect(), x.iter().map(|r| r[1]).collect()];
    // group labels are irrelevant to a pooled fit
    let groups = (0..16).map(|i| if i % 2 == 0 { Group::A } else { Group::B }).collect();
    let data = GroupedColumns::new(vec!["x0".into(), "x1".into()], cols, groups, y).unwrap();
    let rule = fit_logistic(&data, &[0, 1], false, LogisticOptions::default()).unwrap();
    let m = &rule.models[0];
    close(m.intercept, -0.9854173815569685, 1e-7);
    close(m.weights[0], 1.4341141862790956, 1e-7);
    close(m.weights[1], 1.376859703505234, 1e-7);
}

#[test]
fn unconditional_variance_table() {
    // π = 0.8, Δμ = 10
    for (v0, v1, want) in [
        (10.0, 1.0, 18.8),
        (4.0, 2.5, 18.8),
        (2.0, 3.0, 18.8),
        (2.0, 4.0, 19.6),
        (12.0, 3.0, 20.8),
        (4.0, 8.0, 23.2),
    ] {
        let got = unconditional_variance(0.8, Binormal1D::new(0.0, 10.0, v0, v1)).unwrap();
        assert!((got - want).abs() < 1e-12, "{got}");
    }
}

/// Mann–Whitney by direct pair counting.
fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

#[test]
fn empirical_auc_matches_pair_counting() {
    let s = [0.3, 0.3, 1.0, -2.0, 0.7, 0.3, 5.0, 1.0, -0.1, 0.0];
    let y = [1, 0, 0, 0, 1, 1, 1, 0, 1, 0];
    assert_eq!(empirical_auc(&s, &y).unwrap(), brute_auc(&s, &y));
}

#[test]
fn binormal_auc_closed_form() {
    // Φ((μ₁ − μ₀)/√(σ₀² + σ₁²)) with the ratio equal to 1
    let v = binormal_auc(Binormal1D::new(1.0, 4.0, 5.0, 4.0)).unwrap();
    close(v, 0.8413447460685429, 1e-15);
}
