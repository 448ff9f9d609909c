use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairacq::acquisition::{fit_scores, identify_bias, select_feature};
use fairacq::auc::{empirical_auc, pair_auc};
use fairacq::harness::random_owned;
use fairacq::numkit::cholesky;
use fairacq::{AcquisitionState, ClassStats, Strategy};
use fairacq_bench::{guyon, scored_labels, spd};
use std::hint::black_box;

fn auc(c: &mut Criterion) {
    let mut g = c.benchmark_group("empirical_auc");
    for n in [1_000, 20_000, 200_000] {
        let (s, y) = scored_labels(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| empirical_auc(black_box(&s), black_box(&y)).unwrap())
        });
    }
    g.finish();
    let st = ClassStats::pair_from_sums(0.7, 0.4, 1.1, 2.0, 0.3);
    c.bench_function("pair_auc", |b| b.iter(|| pair_auc(black_box(&st), 0.0).unwrap()));
}

fn linalg(c: &mut Criterion) {
    let mut g = c.benchmark_group("cholesky");
    for dim in [3, 10, 50] {
        let m = spd(dim, 2);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| cholesky(black_box(&m), 0.0).unwrap())
        });
    }
    g.finish();
}

fn round(c: &mut Criterion) {
    let data = guyon(20_000, 3);
    let mut st = AcquisitionState::new(vec![random_owned(3, data.n_features())], 3);
    st.acquired.push((st.owned[0] + 1) % data.n_features());
    let mut g = c.benchmark_group("guyon_round");
    g.sample_size(10);
    g.bench_function("fit_and_select", |b| {
        b.iter(|| {
            let (_, scores) = fit_scores(&st, &data, &[&data]).unwrap();
            let report = identify_bias(&st, &data, &scores[0]).unwrap();
            select_feature(&st, &data, &scores[0], &report, &Strategy::FairAuc).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, auc, linalg, round);
criterion_main!(benches);
