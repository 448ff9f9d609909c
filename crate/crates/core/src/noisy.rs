//! Noisy acquisition: the advantaged group receives λ·Z + (1−λ)·N with N
//! standard normal, and λ is chosen so bias never increases.
//!
//! All AUCs here are analytic, computed from (S, Z) class moments of one
//! group. Within a group Z_λ has class means λ·μ_Z, class variances
//! λ²σ² + (1−λ)² and covariance λ·ρ with the score.

use crate::auc::{bias, first_coordinate_auc, pair_auc};
use crate::error::{domain, Error, Result};
use crate::moments::{ClassStats, Group};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Which branch of the λ choice applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseCase {
    /// Post-acquisition AUCs already equal.
    Equal,
    /// Bias can be driven to zero.
    ZeroBias,
    /// Full noise; the advantaged group keeps its previous AUC.
    FullNoise,
    /// λ chosen to hit a requested bias.
    Targeted,
}

/// Outcome of choosing λ for one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub lambda: f64,
    pub advantaged: Group,
    pub case: NoiseCase,
    pub prior_bias: f64,
    pub achieved_bias: f64,
    pub auc_a: f64,
    pub auc_b: f64,
}

/// λ·z + (1−λ)·N on rows where `advantaged` is true; other rows unchanged.
pub fn noisy_feature<R: Rng>(z: &[f64], advantaged: &[bool], lambda: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(domain(format!("lambda {lambda} outside [0, 1]")));
    }
    if z.len() != advantaged.len() {
        return Err(domain("mask length differs from the column"));
    }
    Ok(z.iter()
        .zip(advantaged)
        .map(|(&v, &adv)| {
            if adv {
                let n: f64 = rng.sample(StandardNormal);
                lambda * v + (1.0 - lambda) * n
            } else {
                v
            }
        })
        .collect())
}

/// (S, Z_λ) class moments derived from (S, Z) moments.
pub fn noisy_stats(stats: &ClassStats, lambda: f64) -> ClassStats {
    assert_eq!(stats.dim(), 2, "noisy_stats expects (S, Z) statistics");
    let mut out = stats.clone();
    let noise = (1.0 - lambda) * (1.0 - lambda);
    for (mu, sig) in [(&mut out.mu0, &mut out.sigma0), (&mut out.mu1, &mut out.sigma1)] {
        mu[1] *= lambda;
        let c = sig.get(0, 1) * lambda;
        sig.set(0, 1, c);
        let v = sig.get(1, 1) * lambda * lambda + noise;
        sig.set(1, 1, v);
    }
    out
}

/// Analytic AUC of (S, Z_λ). At λ = 0 the noisy column is independent
/// of class and score, so the value is the score's own AUC.
pub fn auc_with_noise(stats: &ClassStats, lambda: f64, ridge: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(domain(format!("lambda {lambda} outside [0, 1]")));
    }
    if lambda == 0.0 {
        return Ok(first_coordinate_auc(stats));
    }
    pair_auc(&noisy_stats(stats, lambda), ridge)
}

const MAX_ITERS: usize = 200;
const LAMBDA_FLOOR: f64 = 1e-10;

fn plan_at(
    stats_adv: &ClassStats,
    d_post: f64,
    adv: Group,
    lambda: f64,
    prior_bias: f64,
    case: NoiseCase,
    ridge: f64,
) -> Result<NoisePlan> {
    let a_adv = auc_with_noise(stats_adv, lambda, ridge)?;
    let (auc_a, auc_b) = match adv {
        Group::A => (a_adv, d_post),
        Group::B => (d_post, a_adv),
    };
    Ok(NoisePlan {
        lambda,
        advantaged: adv,
        case,
        prior_bias,
        achieved_bias: bias(auc_a, auc_b)?,
        auc_a,
        auc_b,
    })
}

/// Chooses λ for the advantaged group `adv`.
///
/// If the disadvantaged group's new AUC reaches the advantaged group's
/// old AUC, bisection finds λ with zero bias; otherwise λ = 0.
pub fn solve_lambda(
    stats_adv: &ClassStats,
    stats_disadv: &ClassStats,
    adv: Group,
    prior_bias: f64,
    ridge: f64,
) -> Result<NoisePlan> {
    let d_post = pair_auc(stats_disadv, ridge)?;
    let adv_post = pair_auc(stats_adv, ridge)?;
    let adv_pre = auc_with_noise(stats_adv, 0.0, ridge)?;
    if adv_post < d_post {
        return Err(domain("advantaged group has the lower post-acquisition AUC"));
    }
    if adv_post == d_post {
        return plan_at(stats_adv, d_post, adv, 1.0, prior_bias, NoiseCase::Equal, ridge);
    }
    if d_post < adv_pre {
        return plan_at(stats_adv, d_post, adv, 0.0, prior_bias, NoiseCase::FullNoise, ridge);
    }
    // f(lo) <= 0 <= f(hi); keep hi so the advantaged AUC never drops
    // below the target
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut gap = adv_post - d_post;
    for _ in 0..MAX_ITERS {
        if gap <= 1e-12 * d_post || hi - lo < LAMBDA_FLOOR {
            return plan_at(stats_adv, d_post, adv, hi, prior_bias, NoiseCase::ZeroBias, ridge);
        }
        let mid = 0.5 * (lo + hi);
        let f = auc_with_noise(stats_adv, mid, ridge)? - d_post;
        if f >= 0.0 {
            hi = mid;
            gap = f;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric("lambda bisection did not converge".into()))
}

/// λ whose achieved bias equals `target`, within 1e-8.
///
/// The achievable range runs from the bias at the smallest useful λ
/// (zero-bias λ, or 0 when bias cannot reach zero) to the bias at λ = 1.
pub fn target_bias_lambda(
    stats_adv: &ClassStats,
    stats_disadv: &ClassStats,
    adv: Group,
    target: f64,
    ridge: f64,
) -> Result<NoisePlan> {
    let low = solve_lambda(stats_adv, stats_disadv, adv, f64::NAN, ridge)?;
    let d_post = pair_auc(stats_disadv, ridge)?;
    let top = plan_at(stats_adv, d_post, adv, 1.0, f64::NAN, NoiseCase::Targeted, ridge)?;
    let (lo_b, hi_b) = (low.achieved_bias, top.achieved_bias);
    if target < lo_b - 1e-12 || target > hi_b + 1e-12 {
        return Err(Error::Range {
            target,
            lo: lo_b,
            hi: hi_b,
        });
    }
    if (target - hi_b).abs() <= 1e-12 {
        return Ok(top);
    }
    if (target - lo_b).abs() <= 1e-12 {
        return Ok(NoisePlan {
            case: NoiseCase::Targeted,
            ..low
        });
    }
    let (mut lo, mut hi) = (low.lambda, 1.0);
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let p = plan_at(stats_adv, d_post, adv, mid, f64::NAN, NoiseCase::Targeted, ridge)?;
        let g = p.achieved_bias - target;
        if g.abs() <= 1e-10 || hi - lo < 1e-14 {
            return Ok(p);
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric("lambda bisection did not converge".into()))
}

/// Labels the advantaged group by post-acquisition AUC (group a loses
/// ties) and solves for λ with the analytic pre-round bias as prior.
pub fn plan_for_candidate(stats_a: &ClassStats, stats_b: &ClassStats, ridge: f64) -> Result<NoisePlan> {
    let post_a = pair_auc(stats_a, ridge)?;
    let post_b = pair_auc(stats_b, ridge)?;
    let prior = bias(first_coordinate_auc(stats_a), first_coordinate_auc(stats_b))?;
    if post_b < post_a {
        solve_lambda(stats_a, stats_b, Group::A, prior, ridge)
    } else {
        solve_lambda(stats_b, stats_a, Group::B, prior, ridge)
    }
}

/// Group AUCs when group a gets weight `alpha` and group b weight `beta`.
pub fn two_sided_aucs(
    stats_a: &ClassStats,
    stats_b: &ClassStats,
    alpha: f64,
    beta: f64,
    ridge: f64,
) -> Result<(f64, f64)> {
    Ok((
        auc_with_noise(stats_a, alpha, ridge)?,
        auc_with_noise(stats_b, beta, ridge)?,
    ))
}

/// A two-sided plan next to the one-sided plan with the same bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoComparison {
    pub two_sided_auc_a: f64,
    pub two_sided_auc_b: f64,
    pub two_sided_bias: f64,
    pub matched: NoisePlan,
}

impl ParetoComparison {
    /// Smallest AUC advantage of the one-sided plan over the two-sided one.
    pub fn margin(&self) -> f64 {
        (self.matched.auc_a - self.two_sided_auc_a).min(self.matched.auc_b - self.two_sided_auc_b)
    }
}

/// Matches the two-sided (α, β) plan by bias with a one-sided λ plan.
/// Returns `None` when the two-sided bias exceeds the no-noise bias.
pub fn pareto_compare(
    stats_a: &ClassStats,
    stats_b: &ClassStats,
    alpha: f64,
    beta: f64,
    ridge: f64,
) -> Result<Option<ParetoComparison>> {
    let (ta, tb) = two_sided_aucs(stats_a, stats_b, alpha, beta, ridge)?;
    let tbias = bias(ta, tb)?;
    let post_a = pair_auc(stats_a, ridge)?;
    let post_b = pair_auc(stats_b, ridge)?;
    if tbias > bias(post_a, post_b)? {
        return Ok(None);
    }
    let matched = if post_b < post_a {
        target_bias_lambda(stats_a, stats_b, Group::A, tbias, ridge)?
    } else {
        target_bias_lambda(stats_b, stats_a, Group::B, tbias, ridge)?
    };
    Ok(Some(ParetoComparison {
        two_sided_auc_a: ta,
        two_sided_auc_b: tb,
        two_sided_bias: tbias,
        matched,
    }))
}

/// Factor 1 / (1 + 2(1−λ)² / (αλ²)) by which noise can shrink the
/// advantaged group's bound when Z's class variances sum to at least α.
pub fn noise_bound_factor(lambda: f64, alpha: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + 2.0 * (1.0 - lambda).powi(2) / (alpha * lambda * lambda))
}
