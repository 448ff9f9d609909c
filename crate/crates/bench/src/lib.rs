//! Fixtures shared by the benchmarks.

use fairacq::datagen::{gen_guyon, GuyonConfig};
use fairacq::{GroupedColumns, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores with a mild class signal and the matching labels.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
    let s = y.iter().map(|&c| c as f64 * 0.8 + rng.random::<f64>() * 2.0).collect();
    (s, y)
}

/// A well-conditioned SPD matrix of the given size.
pub fn spd(dim: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..dim * dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut m = SymMatrix::identity(dim);
    for i in 0..dim {
        for j in 0..=i {
            let v: f64 = (0..dim).map(|k| a[i * dim + k] * a[j * dim + k]).sum();
            m.set(i, j, m.get(i, j) + v);
        }
    }
    m
}

/// Default Guyon data at `n` rows.
pub fn guyon(n: usize, seed: u64) -> GroupedColumns {
    gen_guyon(&GuyonConfig {
        n,
        seed,
        ..GuyonConfig::default()
    })
    .expect("default config is valid")
    .0
}
