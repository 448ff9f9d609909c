//! Seeded synthetic datasets with known class-conditional structure.
//!
//! Rows draw the group first, then the class at the group's base rate,
//! then features conditionally on the class. Both groups share the same
//! parameters, so any bias comes from sampling and group size alone.

use crate::moments::{Group, GroupedColumns, Population};
use crate::numkit::{cholesky, phi, SymMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Random correlation matrix from partial correlations on a C-vine.
///
/// Partial correlations at tree level k are drawn from a Beta(b, b)
/// rescaled to (−1, 1) with b = 1 + (dim − 2 − k)/2, which makes the
/// result uniform over correlation matrices.
pub fn random_pd_correlation(dim: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partial = vec![vec![0.0; dim]; dim];
    let mut corr = SymMatrix::identity(dim);
    let mut b = 1.0 + (dim as f64 - 1.0) / 2.0;
    for k in 0..dim.saturating_sub(1) {
        b -= 0.5;
        let beta = Beta::new(b, b).expect("beta parameters are positive");
        for i in (k + 1)..dim {
            partial[k][i] = 2.0 * beta.sample(&mut rng) - 1.0;
            let mut p = partial[k][i];
            for l in (0..k).rev() {
                p = p * ((1.0 - partial[l][i].powi(2)) * (1.0 - partial[l][k].powi(2))).sqrt()
                    + partial[l][i] * partial[l][k];
            }
            corr.set(k, i, p);
        }
    }
    corr
}

/// Guyon-style binormal benchmark parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuyonConfig {
    pub n: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub group_a_fraction: f64,
    pub base_rate: f64,
    /// Class-mean gap of each informative feature (unit class variances).
    pub separation: f64,
    /// Informative gaps are separation·u with u ~ U(1 − spread, 1 + spread).
    pub separation_spread: f64,
    /// One parameter draw for both groups. Otherwise each group draws its
    /// own informative set, signs and correlation from the same recipe.
    pub shared_groups: bool,
    pub seed: u64,
}

impl Default for GuyonConfig {
    fn default() -> Self {
        GuyonConfig {
            n: 20_000,
            n_features: 50,
            n_informative: 25,
            group_a_fraction: 0.7,
            base_rate: 0.25,
            separation: 0.4,
            separation_spread: 0.0,
            shared_groups: false,
            seed: 0,
        }
    }
}

/// Parameters the data were drawn from, indexed by group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub populations: [Population; 2],
    pub informative: [Vec<usize>; 2],
}

fn check_fraction(name: &str, v: f64) -> crate::Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(crate::error::domain(format!("{name} must lie in (0, 1)")))
    }
}

fn draw_labels(rng: &mut ChaCha8Rng, n: usize, group_a_fraction: f64, base_rate: f64) -> (Vec<Group>, Vec<u8>) {
    let mut group = Vec::with_capacity(n);
    let mut class = Vec::with_capacity(n);
    for _ in 0..n {
        group.push(if rng.random::<f64>() < group_a_fraction {
            Group::A
        } else {
            Group::B
        });
        class.push(u8::from(rng.random::<f64>() < base_rate));
    }
    (group, class)
}

fn feature_names(d: usize) -> Vec<String> {
    let width = d.saturating_sub(1).to_string().len().max(2);
    (0..d).map(|j| format!("x{j:0width$}")).collect()
}

fn cholesky_rows(corr: &SymMatrix) -> Vec<Vec<f64>> {
    let d = corr.dim();
    let l = cholesky(corr, 0.0).expect("vine correlation is positive definite");
    (0..d).map(|i| (0..=i).map(|k| l.get(i, k)).collect()).collect()
}

/// One correlated standard normal vector L·e.
fn correlated_normal(rng: &mut ChaCha8Rng, l: &[Vec<f64>], e: &mut [f64], out: &mut [f64]) {
    for v in e.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for (o, row) in out.iter_mut().zip(l) {
        *o = row.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
    }
}

fn guyon_population(rng: &mut ChaCha8Rng, cfg: &GuyonConfig) -> (Population, Vec<usize>) {
    let d = cfg.n_features;
    let corr = random_pd_correlation(d, rng.random());
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut informative = order[..cfg.n_informative].to_vec();
    informative.sort_unstable();
    let mut mu1 = vec![0.0; d];
    for &j in &informative {
        let gap = if cfg.separation_spread > 0.0 {
            cfg.separation * rng.random_range(1.0 - cfg.separation_spread..1.0 + cfg.separation_spread)
        } else {
            cfg.separation
        };
        mu1[j] = if rng.random::<bool>() { gap } else { -gap };
    }
    let pop = Population {
        mu0: vec![0.0; d],
        mu1,
        sigma0: corr.clone(),
        sigma1: corr,
    };
    (pop, informative)
}

/// Binormal data: informative features get a ±separation class-mean gap,
/// the rest are noise, all under a random correlation structure.
pub fn gen_guyon(cfg: &GuyonConfig) -> crate::Result<(GroupedColumns, GroundTruth)> {
    check_fraction("group_a_fraction", cfg.group_a_fraction)?;
    check_fraction("base_rate", cfg.base_rate)?;
    if cfg.n_informative > cfg.n_features || cfg.n_features == 0 {
        return Err(crate::error::domain("n_informative must not exceed n_features"));
    }
    if !(0.0..1.0).contains(&cfg.separation_spread) {
        return Err(crate::error::domain("separation_spread must lie in [0, 1)"));
    }
    let d = cfg.n_features;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (pop_a, inf_a) = guyon_population(&mut rng, cfg);
    let (pop_b, inf_b) = if cfg.shared_groups {
        (pop_a.clone(), inf_a.clone())
    } else {
        guyon_population(&mut rng, cfg)
    };
    let truth = GroundTruth {
        populations: [pop_a, pop_b],
        informative: [inf_a, inf_b],
    };
    let chol = [
        cholesky_rows(&truth.populations[0].sigma0),
        cholesky_rows(&truth.populations[1].sigma0),
    ];
    let (group, class) = draw_labels(&mut rng, cfg.n, cfg.group_a_fraction, cfg.base_rate);
    let mut features = vec![Vec::with_capacity(cfg.n); d];
    let (mut e, mut z) = (vec![0.0; d], vec![0.0; d]);
    for i in 0..cfg.n {
        let g = group[i].index();
        correlated_normal(&mut rng, &chol[g], &mut e, &mut z);
        let mu = if class[i] == 1 {
            &truth.populations[g].mu1
        } else {
            &truth.populations[g].mu0
        };
        for j in 0..d {
            features[j].push(z[j] + mu[j]);
        }
    }
    let data = GroupedColumns::new(feature_names(d), features, group, class)?;
    Ok((data, truth))
}

/// Gamma marginal by shape α and rate β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

/// Gamma-marginal benchmark parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub n: usize,
    pub group_a_fraction: f64,
    pub base_rate: f64,
    pub n_informative: usize,
    pub n_uninformative: usize,
    pub negative: GammaParams,
    pub positive: GammaParams,
    pub seed: u64,
}

impl GammaConfig {
    /// Negative class α = 1, β = √2; positive class α = 2, β = 2.
    pub fn dataset1(seed: u64) -> Self {
        GammaConfig {
            n: 20_000,
            group_a_fraction: 0.95,
            base_rate: 0.25,
            n_informative: 25,
            n_uninformative: 25,
            negative: GammaParams {
                shape: 1.0,
                rate: 2f64.sqrt(),
            },
            positive: GammaParams { shape: 2.0, rate: 2.0 },
            seed,
        }
    }

    /// Negative class α = 1, β = 0.5; positive class α = 2, β = √0.5.
    pub fn dataset2(seed: u64) -> Self {
        GammaConfig {
            negative: GammaParams { shape: 1.0, rate: 0.5 },
            positive: GammaParams {
                shape: 2.0,
                rate: 0.5f64.sqrt(),
            },
            ..GammaConfig::dataset1(seed)
        }
    }
}

/// Quantile of Gamma(shape, rate) at the normal quantile `z`, i.e. at
/// probability Φ(z). Upper-tail arithmetic keeps precision for large z.
pub fn gamma_quantile_at_normal(p: GammaParams, z: f64) -> f64 {
    let a = p.shape;
    let upper = z > 0.0;
    // P or Q target, whichever is small
    let target = if upper { phi(-z) } else { phi(z) };
    if a == 1.0 {
        let x = if upper { -target.ln() } else { -(-target).ln_1p() };
        return x / p.rate;
    }
    // Wilson–Hilferty start, then safeguarded Newton on the unit-rate CDF
    let c = 1.0 / (9.0 * a);
    let mut x = (a * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-3 * a);
    let lg = ln_gamma(a);
    for _ in 0..60 {
        let f = if upper {
            target - gamma_ur(a, x)
        } else {
            gamma_lr(a, x) - target
        };
        let dens = ((a - 1.0) * x.ln() - x - lg).exp();
        if dens == 0.0 || !dens.is_finite() {
            break;
        }
        let mut next = x - f / dens;
        if next <= 0.0 {
            next = 0.5 * x;
        }
        let done = (next - x).abs() <= 1e-13 * x;
        x = next;
        if done {
            break;
        }
    }
    x / p.rate
}

/// Gamma-marginal data through a Gaussian copula. Informative features
/// switch marginals with the class; uninformative ones use the negative
/// class marginal for both classes.
pub fn gen_gamma(cfg: &GammaConfig) -> crate::Result<GroupedColumns> {
    check_fraction("group_a_fraction", cfg.group_a_fraction)?;
    check_fraction("base_rate", cfg.base_rate)?;
    for p in [cfg.negative, cfg.positive] {
        if !(p.shape > 0.0 && p.rate > 0.0) {
            return Err(crate::error::domain("gamma shape and rate must be positive"));
        }
    }
    let d = cfg.n_informative + cfg.n_uninformative;
    if d == 0 {
        return Err(crate::error::domain("at least one feature required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let corr = random_pd_correlation(d, rng.random());
    let (group, class) = draw_labels(&mut rng, cfg.n, cfg.group_a_fraction, cfg.base_rate);
    let chol = cholesky_rows(&corr);
    let mut features = vec![Vec::with_capacity(cfg.n); d];
    let (mut e, mut z) = (vec![0.0; d], vec![0.0; d]);
    for &y in &class {
        correlated_normal(&mut rng, &chol, &mut e, &mut z);
        for j in 0..d {
            let p = if j < cfg.n_informative && y == 1 {
                cfg.positive
            } else {
                cfg.negative
            };
            features[j].push(gamma_quantile_at_normal(p, z[j]));
        }
    }
    GroupedColumns::new(feature_names(d), features, group, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vine_small_cases() {
        assert_eq!(random_pd_correlation(1, 3).to_rows(), vec![vec![1.0]]);
        for seed in 0..20 {
            let c = random_pd_correlation(6, seed);
            assert!(cholesky(&c, 0.0).is_ok());
            for i in 0..6 {
                assert_eq!(c.get(i, i), 1.0);
                for j in 0..i {
                    assert!(c.get(i, j).abs() < 1.0);
                }
            }
        }
    }

    #[test]
    fn preset_moments() {
        let d1 = GammaConfig::dataset1(0);
        assert!((d1.negative.mean() - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert_eq!(d1.positive.mean(), 1.0);
        let d2 = GammaConfig::dataset2(0);
        assert!((d2.negative.variance() - 4.0).abs() < 1e-15);
        assert!((d2.positive.variance() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = GammaParams { shape: 2.0, rate: 0.5 };
        for &z in &[-3.0, -1.0, 0.0, 0.7, 2.5, 5.0] {
            let x = gamma_quantile_at_normal(p, z);
            let u = gamma_lr(2.0, x * 0.5);
            assert!((u - phi(z)).abs() < 1e-12, "z={z} x={x} u={u}");
        }
        let e = GammaParams { shape: 1.0, rate: 2.0 };
        let x = gamma_quantile_at_normal(e, 0.0);
        assert!((x - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn guyon_is_seed_deterministic() {
        let cfg = GuyonConfig {
            n: 300,
            seed: 9,
            ..Default::default()
        };
        let (a, ta) = gen_guyon(&cfg).unwrap();
        let (b, tb) = gen_guyon(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.informative[0].len(), 25);
        assert_eq!(ta.informative[1].len(), 25);
        let shared = GuyonConfig {
            shared_groups: true,
            ..cfg
        };
        let (_, ts) = gen_guyon(&shared).unwrap();
        assert_eq!(ts.populations[0], ts.populations[1]);
    }
}
