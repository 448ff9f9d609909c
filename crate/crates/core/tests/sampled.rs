//! Invariants checked on generated samples: moment estimates, scoring
//! rules, the acquisition loop, data generation and file round trips.

use fairacq::acquisition::{evaluate_candidates, identify_bias, run_detailed, select_feature, weighted_analytic_auc};
use fairacq::auc::{binormal_auc, empirical_auc};
use fairacq::datagen::{gen_gamma, gen_guyon, GammaConfig, GuyonConfig};
use fairacq::harness::{from_json, ingest_labeled, random_owned, run_on, to_json, write_csv, IngestOptions};
use fairacq::moments::{ssr, ssr_columns};
use fairacq::scoring::{fit_fld, fit_logistic, score, LogisticOptions};
use fairacq::{
    AcquisitionState, AucSource, Binormal1D, ExperimentConfig, Group, GroupedColumns, ScoringKind, Strategy,
};

fn guyon(n: usize, d: usize, k: usize, seed: u64) -> (GroupedColumns, fairacq::datagen::GroundTruth) {
    gen_guyon(&GuyonConfig {
        n,
        n_features: d,
        n_informative: k,
        seed,
        ..GuyonConfig::default()
    })
    .unwrap()
}

#[test]
fn moments_converge_to_truth() {
    // smallest cell (group b positives) holds about 105k rows
    let (data, truth) = guyon(1_400_000, 3, 2, 11);
    for g in Group::BOTH {
        let st = ssr(&data, &[0, 1, 2], g).unwrap();
        let pop = &truth.populations[g.index()];
        for (mu, sig, mu_t, sig_t, n) in [
            (&st.mu0, &st.sigma0, &pop.mu0, &pop.sigma0, st.n0),
            (&st.mu1, &st.sigma1, &pop.mu1, &pop.sigma1, st.n1),
        ] {
            assert!(n >= 100_000, "{n}");
            let n = n as f64;
            for i in 0..3 {
                let se = (sig_t.get(i, i) / n).sqrt();
                assert!((mu[i] - mu_t[i]).abs() < 5.0 * se, "mean {i}: {} vs {}", mu[i], mu_t[i]);
                for j in 0..=i {
                    let s = sig_t.get(i, j);
                    let se = ((sig_t.get(i, i) * sig_t.get(j, j) + s * s) / n).sqrt();
                    assert!(
                        (sig.get(i, j) - s).abs() < 5.0 * se,
                        "cov {i}{j}: {} vs {s}",
                        sig.get(i, j)
                    );
                }
            }
        }
    }
}

#[test]
fn single_feature_stats_are_scalar_moments() {
    let (data, _) = guyon(3000, 4, 2, 3);
    for g in Group::BOTH {
        let st = ssr(&data, &[2], g).unwrap();
        for (y, mu, var) in [
            (0u8, st.mu0[0], st.sigma0.get(0, 0)),
            (1, st.mu1[0], st.sigma1.get(0, 0)),
        ] {
            let x: Vec<f64> = data.rows(g, y).iter().map(|&i| data.feature(2)[i]).collect();
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
            assert!((mu - m).abs() < 1e-12 && (var - v).abs() < 1e-12);
        }
    }
}

fn reversed(data: &GroupedColumns) -> GroupedColumns {
    let rows: Vec<usize> = (0..data.n_rows()).rev().collect();
    data.subset(&rows).unwrap()
}

#[test]
fn stats_ignore_row_order() {
    let (data, _) = guyon(4000, 5, 3, 4);
    let rev = reversed(&data);
    for g in Group::BOTH {
        assert_eq!(ssr(&data, &[0, 1, 4], g).unwrap(), ssr(&rev, &[0, 1, 4], g).unwrap());
    }
}

#[test]
fn fld_and_logistic_rank_alike() {
    let (data, _) = guyon(20_000, 10, 6, 5);
    let feats = [0, 1, 2, 3, 4, 5, 6, 7];
    for protected in [false, true] {
        let f = fit_fld(&data, &feats, protected, 0.0).unwrap();
        let l = fit_logistic(&data, &feats, protected, LogisticOptions::default()).unwrap();
        let sf = score(&f, &data, &feats).unwrap().values;
        let sl = score(&l, &data, &feats).unwrap().values;
        for g in Group::BOTH {
            let rows = data.group_rows(g);
            let y: Vec<u8> = rows.iter().map(|&i| data.classes()[i]).collect();
            let pick = |s: &[f64]| rows.iter().map(|&i| s[i]).collect::<Vec<_>>();
            let a = empirical_auc(&pick(&sf), &y).unwrap();
            let b = empirical_auc(&pick(&sl), &y).unwrap();
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }
}

#[test]
fn scoring_is_deterministic_and_order_free() {
    let (data, _) = guyon(5000, 6, 3, 6);
    let rev = reversed(&data);
    let feats = [1, 3, 5];
    let l1 = fit_logistic(&data, &feats, true, LogisticOptions::default()).unwrap();
    let l2 = fit_logistic(&data, &feats, true, LogisticOptions::default()).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(score(&l1, &data, &feats).unwrap(), score(&l2, &data, &feats).unwrap());
    let lr = fit_logistic(&rev, &feats, true, LogisticOptions::default()).unwrap();
    let f1 = fit_fld(&data, &feats, true, 0.0).unwrap();
    let fr = fit_fld(&rev, &feats, true, 0.0).unwrap();
    for (a, b) in [(&l1, &lr), (&f1, &fr)] {
        for (m, n) in a.models.iter().zip(&b.models) {
            assert!((m.intercept - n.intercept).abs() < 1e-10);
            for (x, y) in m.weights.iter().zip(&n.weights) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn fair_auc_pick_is_the_best_candidate() {
    for seed in 0..4 {
        let (data, _) = guyon(4000, 12, 6, seed);
        let mut st = AcquisitionState::new(vec![random_owned(seed, 12)], seed);
        st.acquired.push((st.owned[0] + 1) % 12);
        let (_, scores) = fairacq::acquisition::fit_scores(&st, &data, &[&data]).unwrap();
        let report = identify_bias(&st, &data, &scores[0]).unwrap();
        let sel = select_feature(&st, &data, &scores[0], &report, &Strategy::FairAuc).unwrap();
        let all = evaluate_candidates(&st, &data, &scores[0], report.disadvantaged).unwrap();
        let best = all.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let first = all.iter().find(|c| c.1 == best).unwrap().0;
        assert_eq!(sel.features, vec![first]);
        assert_eq!(sel.objective, best);
        assert_eq!(sel.evaluations, all.len());
    }
}

#[test]
fn empirical_disadvantaged_auc_holds_up() {
    // default logistic, per-group, in-sample
    for seed in 0..2 {
        let (data, _) = guyon(6000, 15, 8, seed);
        let st = AcquisitionState::new(vec![random_owned(seed, 15)], seed);
        let recs = run_detailed(&st, &data, &Strategy::FairAuc, 6, None).unwrap().records;
        for w in recs.windows(2) {
            let (before, after) = match w[0].disadvantaged {
                Group::A => (w[0].auc_a, w[1].auc_a),
                Group::B => (w[0].auc_b, w[1].auc_b),
            };
            assert!(after >= before - 0.01, "{before} -> {after}");
        }
    }
}

#[test]
fn empirical_auc_tracks_formula_at_any_base_rate() {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let p = Binormal1D::new(0.0, 0.9, 1.0, 2.0);
    let formula = binormal_auc(p).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for pi in [0.05, 0.25, 0.5, 0.8] {
        let n = 20_000;
        let y: Vec<u8> = (0..n).map(|_| rng.random_bool(pi) as u8).collect();
        let s: Vec<f64> = y
            .iter()
            .map(|&c| {
                let z: f64 = rng.sample(StandardNormal);
                if c == 1 {
                    p.mu1 + p.var1.sqrt() * z
                } else {
                    p.mu0 + p.var0.sqrt() * z
                }
            })
            .collect();
        let n1 = y.iter().filter(|&&c| c == 1).count() as f64;
        let n0 = n as f64 - n1;
        // Hanley-McNeil standard error
        let a = formula;
        let (q1, q2) = (a / (2.0 - a), 2.0 * a * a / (1.0 + a));
        let se = ((a * (1.0 - a) + (n1 - 1.0) * (q1 - a * a) + (n0 - 1.0) * (q2 - a * a)) / (n0 * n1)).sqrt();
        let got = empirical_auc(&s, &y).unwrap();
        assert!((got - a).abs() < 3.0 * se, "pi {pi}: {got} vs {a} (se {se})");
    }
}

fn analytic_state(seed: u64, d: usize) -> AcquisitionState {
    let mut st = AcquisitionState::new(vec![random_owned(seed, d)], seed);
    st.scoring = ScoringKind::Fld;
    st.auc_source = AucSource::Analytic;
    st.epsilon = 0.0;
    st
}

#[test]
fn disadvantaged_group_never_loses_auc() {
    for seed in 0..3 {
        let (data, _) = guyon(6000, 15, 8, seed);
        let out = run_detailed(&analytic_state(seed, 15), &data, &Strategy::FairAuc, 8, None).unwrap();
        for w in out.records.windows(2) {
            let g = w[0].disadvantaged;
            let at = |r: &fairacq::RoundRecord| match g {
                Group::A => r.auc_a,
                Group::B => r.auc_b,
            };
            assert!(
                at(&w[1]) >= at(&w[0]) - 1e-12,
                "round {}: {} -> {}",
                w[1].round,
                at(&w[0]),
                at(&w[1])
            );
        }
    }
}

#[test]
fn max_auc_objective_never_drops() {
    for seed in 0..3 {
        let (data, _) = guyon(6000, 15, 8, seed);
        let out = run_detailed(&analytic_state(seed, 15), &data, &Strategy::MaxAuc, 8, None).unwrap();
        let h: Vec<f64> = out
            .scores
            .iter()
            .map(|s| weighted_analytic_auc(&data, s).unwrap())
            .collect();
        for w in h.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{h:?}");
        }
    }
}

#[test]
fn guyon_cell_fractions() {
    let cfg = GuyonConfig {
        n: 50_000,
        n_features: 3,
        n_informative: 1,
        seed: 21,
        ..GuyonConfig::default()
    };
    let (data, _) = gen_guyon(&cfg).unwrap();
    let n = data.n_rows() as f64;
    let p = cfg.group_a_fraction;
    let fa = data.group_size(Group::A) as f64 / n;
    assert!((fa - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt(), "{fa}");
    for g in Group::BOTH {
        let m = data.group_size(g) as f64;
        let r = data.rows(g, 1).len() as f64 / m;
        let q = cfg.base_rate;
        assert!((r - q).abs() < 3.0 * (q * (1.0 - q) / m).sqrt(), "{r}");
    }
}

#[test]
fn shared_groups_share_parameters() {
    let cfg = GuyonConfig {
        n: 200_000,
        n_features: 4,
        n_informative: 2,
        shared_groups: true,
        seed: 8,
        ..GuyonConfig::default()
    };
    let (data, truth) = gen_guyon(&cfg).unwrap();
    assert_eq!(truth.populations[0], truth.populations[1]);
    assert_eq!(truth.informative[0], truth.informative[1]);
    // the sample moments of the two groups agree within sampling error
    let a = ssr(&data, &[0, 1, 2, 3], Group::A).unwrap();
    let b = ssr(&data, &[0, 1, 2, 3], Group::B).unwrap();
    let se = |na: usize, nb: usize| (1.0 / na as f64 + 1.0 / nb as f64).sqrt();
    for i in 0..4 {
        let s0 = truth.populations[0].sigma0.get(i, i).sqrt();
        let s1 = truth.populations[0].sigma1.get(i, i).sqrt();
        assert!((a.mu0[i] - b.mu0[i]).abs() < 5.0 * s0 * se(a.n0, b.n0));
        assert!((a.mu1[i] - b.mu1[i]).abs() < 5.0 * s1 * se(a.n1, b.n1));
    }
}

#[test]
fn gamma_sample_moments() {
    let cfg = GammaConfig {
        n: 100_000,
        ..GammaConfig::dataset1(2)
    };
    let data = gen_gamma(&cfg).unwrap();
    assert_eq!(data.n_features(), 50);
    for g in Group::BOTH {
        for (j, informative) in [(0, true), (30, false)] {
            for y in [0u8, 1] {
                let p = if informative && y == 1 {
                    cfg.positive
                } else {
                    cfg.negative
                };
                let rows = data.rows(g, y);
                let n = rows.len() as f64;
                let m = rows.iter().map(|&i| data.feature(j)[i]).sum::<f64>() / n;
                assert!(data.feature(j).iter().all(|&v| v >= 0.0));
                assert!((m - p.mean()).abs() < 5.0 * (p.variance() / n).sqrt(), "{j} {y}: {m}");
            }
        }
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let (data, _) = guyon(2000, 5, 2, 13);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    write_csv(&data, &path).unwrap();
    let (back, labels) = ingest_labeled(&path, "group", "class", IngestOptions::default()).unwrap();
    assert_eq!(labels, ["a".to_string(), "b".to_string()]);
    assert_eq!(back, data);
}

#[test]
fn reports_are_reproducible_and_serializable() {
    let (data, _) = guyon(3000, 8, 4, 17);
    let labels = ["a".to_string(), "b".to_string()];
    let mut cfg = ExperimentConfig::new("unused.csv");
    cfg.rounds = 4;
    cfg.bootstrap = 30;
    cfg.noisy = true;
    cfg.seed = 17;
    let r1 = run_on(&cfg, &data, vec![0], labels.clone()).unwrap();
    let r2 = run_on(&cfg, &data, vec![0], labels).unwrap();
    assert_eq!(r1, r2);
    let js = to_json(&r1).unwrap();
    let back = from_json(&js).unwrap();
    assert_eq!(back, r1);
    assert_eq!(to_json(&back).unwrap(), js);
    // column order in a fresh sample must not matter to the stats
    let cols: Vec<&[f64]> = vec![data.feature(3), data.feature(1)];
    let st = ssr_columns(&data, &cols, Group::B).unwrap();
    assert_eq!(st.mu1[0], ssr(&data, &[3], Group::B).unwrap().mu1[0]);
}
