//! AUC formulas: binormal closed form, Fisher discriminant, Mann–Whitney,
//! the ratio bias between groups and the unconditional variance split.

use crate::error::{domain, Result};
use crate::moments::{ClassStats, Group};
use crate::numkit::{phi, quad_form, solve};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// An AUC in [0, 1]. Values below 0.5 are kept as they are.
pub type AucValue = f64;

/// One feature's class-conditional normal parameters within a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binormal1D {
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
}

impl Binormal1D {
    pub fn new(mu0: f64, mu1: f64, var0: f64, var1: f64) -> Self {
        Binormal1D { mu0, mu1, var0, var1 }
    }
}

/// Φ((μ₁ − μ₀) / √(σ₀² + σ₁²)).
pub fn binormal_auc(p: Binormal1D) -> Result<AucValue> {
    if !(p.var0 > 0.0 && p.var1 > 0.0) {
        return Err(domain("binormal variances must be positive"));
    }
    Ok(phi((p.mu1 - p.mu0) / (p.var0 + p.var1).sqrt()))
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(domain("empirical AUC needs both classes"));
    }
    Ok((n0, n1))
}

// Sorted order of the scores, ties adjacent.
fn order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Mann–Whitney AUC with half credit for ties, via midranks.
pub fn empirical_auc(scores: &[f64], labels: &[u8]) -> Result<AucValue> {
    if scores.len() != labels.len() {
        return Err(domain("scores and labels differ in length"));
    }
    let (n0, n1) = class_counts(labels)?;
    Ok(weighted_auc_sorted(
        scores,
        labels,
        &order(scores),
        None,
        n0 as f64,
        n1 as f64,
    ))
}

/// AUC with per-row multiplicities, scanning rows in sorted order.
fn weighted_auc_sorted(scores: &[f64], labels: &[u8], idx: &[usize], weights: Option<&[f64]>, w0: f64, w1: f64) -> f64 {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut neg_below = 0.0;
    let mut credit = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        let (mut tie_neg, mut tie_pos) = (0.0, 0.0);
        while k < idx.len() && scores[idx[k]] == s {
            let i = idx[k];
            if labels[i] == 1 {
                tie_pos += w(i);
            } else {
                tie_neg += w(i);
            }
            k += 1;
        }
        credit += tie_pos * (neg_below + 0.5 * tie_neg);
        neg_below += tie_neg;
    }
    credit / (w0 * w1)
}

/// 1 − min/max of the two group AUCs.
pub fn bias(auc_a: AucValue, auc_b: AucValue) -> Result<f64> {
    let hi = auc_a.max(auc_b);
    if !(hi > 0.0) {
        return Err(domain("bias undefined when both AUCs are zero"));
    }
    Ok(1.0 - auc_a.min(auc_b) / hi)
}

/// Lower-AUC group; group a on exact ties.
pub fn disadvantaged(auc_a: AucValue, auc_b: AucValue) -> Group {
    if auc_b < auc_a {
        Group::B
    } else {
        Group::A
    }
}

/// w* = (Σ₀ + Σ₁ + ridge·I)⁻¹ (μ₁ − μ₀).
pub fn fld_direction(stats: &ClassStats, ridge: f64) -> Result<Vec<f64>> {
    let dmu = stats.delta_mu();
    if dmu.iter().all(|&d| d == 0.0) {
        return Ok(vec![0.0; dmu.len()]);
    }
    solve(&stats.sigma_sum(), &dmu, ridge)
}

/// Φ(√(Δμᵀ (Σ₀+Σ₁)⁻¹ Δμ)), the best AUC of any linear score.
pub fn fld_auc(stats: &ClassStats, ridge: f64) -> Result<AucValue> {
    Ok(phi(quad_form(&stats.sigma_sum(), &stats.delta_mu(), ridge)?.sqrt()))
}

/// FLD AUC of a 2-dim (S, Z) system.
pub fn pair_auc(stats2: &ClassStats, ridge: f64) -> Result<AucValue> {
    if stats2.dim() != 2 {
        return Err(domain("pair_auc expects (S, Z) statistics"));
    }
    fld_auc(stats2, ridge)
}

/// Binormal AUC of coordinate 0 alone, i.e. of the current score.
/// A degenerate score with zero variance counts as 0.5.
pub fn first_coordinate_auc(stats: &ClassStats) -> AucValue {
    let v = stats.sigma0.get(0, 0) + stats.sigma1.get(0, 0);
    if v > 0.0 {
        phi(stats.delta_mu()[0] / v.sqrt())
    } else {
        0.5
    }
}

/// π(1−π)Δμ² + π·σ₁² + (1−π)·σ₀².
pub fn unconditional_variance(pi: f64, p: Binormal1D) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(domain("base rate must lie in (0, 1)"));
    }
    let d = p.mu1 - p.mu0;
    Ok(pi * (1.0 - pi) * d * d + pi * p.var1 + (1.0 - pi) * p.var0)
}

/// Percentile interval of the AUC under a class-stratified bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
}

/// 95% percentile interval from `resamples` class-stratified bootstrap draws.
pub fn bootstrap_ci<R: Rng>(
    scores: &[f64],
    labels: &[u8],
    resamples: usize,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    let (n0, n1) = class_counts(labels)?;
    if resamples == 0 {
        return Err(domain("bootstrap needs at least one resample"));
    }
    let idx = order(scores);
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let mut weights = vec![0.0; scores.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        weights.iter_mut().for_each(|w| *w = 0.0);
        for cell in [&pos, &neg] {
            for _ in 0..cell.len() {
                weights[cell[rng.random_range(0..cell.len())]] += 1.0;
            }
        }
        stats.push(weighted_auc_sorted(
            scores,
            labels,
            &idx,
            Some(&weights),
            n0 as f64,
            n1 as f64,
        ));
    }
    stats.sort_by(f64::total_cmp);
    let at = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(ConfidenceInterval {
        lo: at(0.025),
        hi: at(0.975),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SymMatrix;

    #[test]
    fn binormal_examples() {
        assert_eq!(binormal_auc(Binormal1D::new(1.0, 1.0, 2.0, 3.0)).unwrap(), 0.5);
        let v = binormal_auc(Binormal1D::new(0.0, 5f64.sqrt(), 2.0, 3.0)).unwrap();
        assert!((v - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!(binormal_auc(Binormal1D::new(0.0, 1.0, 0.0, 1.0)).is_err());
        // anti-informative orientation is reported, not flipped
        assert!(binormal_auc(Binormal1D::new(1.0, 0.0, 1.0, 1.0)).unwrap() < 0.5);
    }

    #[test]
    fn empirical_examples() {
        let v = empirical_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(v, 0.75);
        assert_eq!(empirical_auc(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(empirical_auc(&[7.0; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
        assert!(empirical_auc(&[1.0, 2.0], &[1, 1]).is_err());
    }

    #[test]
    fn bias_examples() {
        assert!((bias(0.8, 0.6).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(bias(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(bias(1.0, 0.5).unwrap(), 0.5);
        assert!(bias(0.0, 0.0).is_err());
        assert_eq!(disadvantaged(0.6, 0.6), Group::A);
        assert_eq!(disadvantaged(0.61, 0.51), Group::B);
    }

    #[test]
    fn fld_examples() {
        let i2 = SymMatrix::identity(2);
        let st = ClassStats::from_moments(vec![0.0, 0.0], vec![2.0, 0.0], i2.clone(), i2.clone());
        let w = fld_direction(&st, 0.0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15 && w[1] == 0.0);

        let half = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let st = ClassStats::from_moments(vec![0.0, 0.0], vec![1.0, 1.0], half.clone(), half);
        let w = fld_direction(&st, 0.0).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);

        let st = ClassStats::from_moments(vec![0.0, 0.0], vec![1.0, 1.0], i2.clone(), i2.clone());
        assert!((fld_auc(&st, 0.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-14);
        let st = ClassStats::from_moments(vec![1.0, 2.0], vec![1.0, 2.0], i2.clone(), i2);
        assert_eq!(fld_auc(&st, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn pair_examples() {
        let st = ClassStats::pair_from_sums(1.0, 1.0, 1.0, 1.0, 0.0);
        assert!((pair_auc(&st, 0.0).unwrap() - 0.921_350_396_474_857_3).abs() < 1e-12);
        let st = ClassStats::pair_from_sums(1.5, 0.0, 2.0, 3.0, 0.0);
        assert!((pair_auc(&st, 0.0).unwrap() - first_coordinate_auc(&st)).abs() < 1e-15);
    }

    #[test]
    fn variance_examples() {
        let v = unconditional_variance(0.8, Binormal1D::new(0.0, 10.0, 10.0, 1.0)).unwrap();
        assert_eq!(format!("{v:.2}"), "18.80");
        let v = unconditional_variance(0.3, Binormal1D::new(2.0, 2.0, 1.5, 1.5)).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
        assert!(unconditional_variance(1.0, Binormal1D::new(0.0, 1.0, 1.0, 1.0)).is_err());
    }
}
