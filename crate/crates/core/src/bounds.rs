//! Lower bounds on the AUC gain of a fairAUC round, and grid checks of
//! the two Φ(√·) inequalities they are built on.
//!
//! The bound for candidate ℓ is ¼·γ^{3/2}·β²·(1−δ)² with γ = 1 − AUC,
//! β = |Δv| / √(σ₀² + σ₁²) for the candidate, and δ = |ρ₀ + ρ₁| / |Δv|
//! clamped to 1. β and δ are measured with the score on the Fisher scale,
//! where its class-mean gap equals its class-summed variance. The
//! argument behind the bound needs β ≤ 1; candidates beyond that are
//! reported but do not enter the check.

use crate::auc::{disadvantaged, first_coordinate_auc, fld_auc, fld_direction, pair_auc};
use crate::datagen::random_pd_correlation;
use crate::error::{domain, Result};
use crate::moments::{ClassStats, Group, Population};
use crate::numkit::{phi, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// γ, β, δ for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    pub beta: f64,
    pub delta: f64,
    pub feature: usize,
}

impl BoundInputs {
    /// β ≤ 1, which the bound's derivation relies on.
    pub fn in_premise(&self) -> bool {
        self.beta <= 1.0 + 1e-12
    }
}

/// Rescales the score coordinate so its class-mean gap equals its
/// class-summed variance, the scale of the unnormalized FLD score.
pub fn fisher_scale(stats2: &ClassStats) -> ClassStats {
    let v = stats2.sigma0.get(0, 0) + stats2.sigma1.get(0, 0);
    let d = stats2.delta_mu()[0];
    if v > 0.0 {
        stats2.scale_first(d / v)
    } else {
        stats2.scale_first(0.0)
    }
}

/// |Δv| / √(σ₀² + σ₁²) of the candidate coordinate.
pub fn beta_of(stats2: &ClassStats) -> Result<f64> {
    let s = stats2.sigma0.get(1, 1) + stats2.sigma1.get(1, 1);
    if !(s > 0.0) {
        return Err(domain("candidate has zero class variance"));
    }
    Ok(stats2.delta_mu()[1].abs() / s.sqrt())
}

/// |ρ₀ + ρ₁| / |Δv| on the Fisher scale, clamped to 1.
pub fn delta_of(stats2: &ClassStats) -> Result<f64> {
    let dv = stats2.delta_mu()[1];
    if dv == 0.0 {
        return Err(domain("delta undefined for a candidate without mean gap"));
    }
    let st = fisher_scale(stats2);
    let rho = st.sigma0.get(0, 1) + st.sigma1.get(0, 1);
    Ok((rho.abs() / dv.abs()).min(1.0))
}

/// γ, β, δ from (S, Z) moments, γ being one minus the score's AUC.
pub fn candidate_inputs(stats2: &ClassStats, feature: usize) -> Result<Option<BoundInputs>> {
    let beta = beta_of(stats2)?;
    let gamma = 1.0 - first_coordinate_auc(stats2);
    let delta = if beta == 0.0 { 0.0 } else { delta_of(stats2)? };
    Ok(Some(BoundInputs {
        gamma,
        beta,
        delta,
        feature,
    }))
}

/// ¼·γ^{3/2}·β²·(1−δ)².
pub fn improvement_bound(b: &BoundInputs) -> f64 {
    0.25 * b.gamma.max(0.0).powf(1.5) * b.beta * b.beta * (1.0 - b.delta).powi(2)
}

/// Margin of one candidate against the disadvantaged group's improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMargin {
    pub feature: usize,
    pub bound: f64,
    pub in_premise: bool,
    pub margin: f64,
}

/// Result of checking one round against both guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub improvement: f64,
    pub max_bound: f64,
    pub candidates: Vec<CandidateMargin>,
    pub advantaged_improvement: f64,
    pub advantaged_bound: f64,
    pub advantaged_in_premise: bool,
}

impl VerifyReport {
    /// Smallest margin over all checks that apply.
    pub fn min_margin(&self) -> f64 {
        let t1 = self.improvement - self.max_bound;
        if self.advantaged_in_premise {
            t1.min(self.advantaged_improvement - self.advantaged_bound)
        } else {
            t1
        }
    }
}

/// Which group's guarantee a check concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCheck {
    /// Every in-premise candidate against the disadvantaged group's gain.
    Disadvantaged,
    /// The selected feature against the advantaged group's gain.
    Advantaged,
}

/// A failed guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub check: BoundCheck,
    pub feature: usize,
    pub margin: f64,
}

/// Checks that the disadvantaged group's improvement is at least every
/// in-premise candidate bound, and that the advantaged group's
/// improvement is at least its own bound at the selected feature.
pub fn verify_round(
    improvement: f64,
    candidates: &[BoundInputs],
    advantaged_improvement: f64,
    advantaged_selected: &BoundInputs,
    slack: f64,
) -> std::result::Result<VerifyReport, BoundViolation> {
    let mut margins = Vec::with_capacity(candidates.len());
    let mut max_bound: f64 = 0.0;
    for b in candidates {
        let bound = improvement_bound(b);
        let in_premise = b.in_premise();
        let margin = improvement - bound;
        if in_premise {
            max_bound = max_bound.max(bound);
            if margin < -slack {
                return Err(BoundViolation {
                    check: BoundCheck::Disadvantaged,
                    feature: b.feature,
                    margin,
                });
            }
        }
        margins.push(CandidateMargin {
            feature: b.feature,
            bound,
            in_premise,
            margin,
        });
    }
    let adv_bound = improvement_bound(advantaged_selected);
    let adv_in = advantaged_selected.in_premise();
    if adv_in && advantaged_improvement - adv_bound < -slack {
        return Err(BoundViolation {
            check: BoundCheck::Advantaged,
            feature: advantaged_selected.feature,
            margin: advantaged_improvement - adv_bound,
        });
    }
    Ok(VerifyReport {
        improvement,
        max_bound,
        candidates: margins,
        advantaged_improvement,
        advantaged_bound: adv_bound,
        advantaged_in_premise: adv_in,
    })
}

/// Exact binormal populations of both groups, with owned and candidate
/// column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticInstance {
    pub populations: [Population; 2],
    pub owned: Vec<usize>,
    pub candidates: Vec<usize>,
}

/// One analytic fairAUC round with per-group FLD scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRound {
    pub disadvantaged: Group,
    pub before: [f64; 2],
    pub after: [f64; 2],
    pub selected: usize,
    /// pair_auc of each candidate for the disadvantaged group.
    pub candidate_aucs: Vec<f64>,
    pub disadvantaged_inputs: Vec<BoundInputs>,
    pub advantaged_selected: BoundInputs,
}

impl AnalyticRound {
    pub fn verify(&self, slack: f64) -> std::result::Result<VerifyReport, BoundViolation> {
        let d = self.disadvantaged.index();
        let a = self.disadvantaged.other().index();
        verify_round(
            self.after[d] - self.before[d],
            &self.disadvantaged_inputs,
            self.after[a] - self.before[a],
            &self.advantaged_selected,
            slack,
        )
    }
}

/// Runs one fairAUC round on exact moments: FLD score per group on the
/// owned columns, candidates ranked by the disadvantaged group's pair
/// AUC, improvements measured on the full owned-plus-selected system.
pub fn analytic_round(inst: &AnalyticInstance, ridge: f64) -> Result<AnalyticRound> {
    if inst.candidates.is_empty() {
        return Err(crate::error::Error::NoViableCandidate);
    }
    let mut w = Vec::with_capacity(2);
    let mut before = [0.0; 2];
    for g in Group::BOTH {
        let st = inst.populations[g.index()].stats(&inst.owned);
        w.push(fld_direction(&st, ridge)?);
        before[g.index()] = fld_auc(&st, ridge)?;
    }
    let gd = disadvantaged(before[0], before[1]);
    let pop_d = &inst.populations[gd.index()];
    let mut candidate_aucs = Vec::with_capacity(inst.candidates.len());
    let mut inputs = Vec::with_capacity(inst.candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (k, &l) in inst.candidates.iter().enumerate() {
        let st = pop_d.projected(&w[gd.index()], &inst.owned, &[l]);
        let v = pair_auc(&st, ridge)?;
        candidate_aucs.push(v);
        if let Some(b) = candidate_inputs(&st, l)? {
            inputs.push(b);
        }
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((k, v));
        }
    }
    let selected = inst.candidates[best.unwrap().0];
    let mut full = inst.owned.clone();
    full.push(selected);
    let mut after = [0.0; 2];
    for g in Group::BOTH {
        after[g.index()] = fld_auc(&inst.populations[g.index()].stats(&full), ridge)?;
    }
    let ga = gd.other();
    let st_a = inst.populations[ga.index()].projected(&w[ga.index()], &inst.owned, &[selected]);
    let advantaged_selected = candidate_inputs(&st_a, selected)?.expect("inputs always present");
    Ok(AnalyticRound {
        disadvantaged: gd,
        before,
        after,
        selected,
        candidate_aucs,
        disadvantaged_inputs: inputs,
        advantaged_selected,
    })
}

fn random_cov<R: Rng>(rng: &mut R, dim: usize) -> SymMatrix {
    let corr = random_pd_correlation(dim, rng.random());
    let sd: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut m = SymMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..=i {
            m.set(i, j, corr.get(i, j) * sd[i] * sd[j]);
        }
    }
    m
}

/// Random instance with `d` owned columns and `m` candidates. Every
/// candidate has β below 1 in both groups, and a third of them carry no
/// class signal at all.
pub fn random_analytic_instance(seed: u64, d: usize, m: usize) -> AnalyticInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = d + m;
    let make = |rng: &mut ChaCha8Rng| {
        let sigma0 = random_cov(rng, dim);
        let sigma1 = random_cov(rng, dim);
        let mu0 = vec![0.0; dim];
        let mut mu1 = vec![0.0; dim];
        for (i, v) in mu1.iter_mut().enumerate() {
            let s = (sigma0.get(i, i) + sigma1.get(i, i)).sqrt();
            *v = if i < d {
                rng.random_range(-0.8..0.8) * s
            } else if (i - d) % 3 == 2 {
                0.0
            } else {
                rng.random_range(-0.95..0.95) * s
            };
        }
        Population {
            mu0,
            mu1,
            sigma0,
            sigma1,
        }
    };
    let a = make(&mut rng);
    let b = make(&mut rng);
    AnalyticInstance {
        populations: [a, b],
        owned: (0..d).collect(),
        candidates: (d..dim).collect(),
    }
}

/// Worst case found by a lemma grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaGrid {
    pub points: usize,
    pub checked: usize,
    pub min_margin: f64,
    /// (γ, α, Δ₀, Δ) at the minimum margin; Δ₀ and Δ unused for the
    /// inverting lemma.
    pub argmin: [f64; 4],
    pub violations: usize,
}

/// Both lemma grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub inverting: LemmaGrid,
    pub lower_bound: LemmaGrid,
}

/// (2/√π)·γ^{3/2}·Δ₀ / (√(2/e + Δ₀)·(2 + Δ₀)).
pub fn lemma_lower_bound(gamma: f64, delta0: f64) -> f64 {
    let two_over_e = 2.0 / std::f64::consts::E;
    std::f64::consts::FRAC_2_SQRT_PI * gamma.powf(1.5) * delta0 / ((two_over_e + delta0).sqrt() * (2.0 + delta0))
}

/// If Φ(√α) < 1 − γ then α < −2 ln(2γ), over γ ∈ (0, 0.5] with α
/// spanning [0, 1.25·edge], where the edge solves Φ(√α) = 1 − γ.
pub fn check_inverting(n_gamma: usize, n_alpha: usize) -> LemmaGrid {
    let mut g = LemmaGrid {
        points: 0,
        checked: 0,
        min_margin: f64::INFINITY,
        argmin: [0.0; 4],
        violations: 0,
    };
    for i in 1..=n_gamma {
        let gamma = 0.5 * i as f64 / n_gamma as f64;
        let cap = -2.0 * (2.0 * gamma).ln();
        let edge = if cap > 0.0 { bisect_edge(gamma, cap) } else { 0.0 };
        let top = if edge > 0.0 { 1.25 * edge } else { 1.0 };
        let mut alphas: Vec<f64> = (0..n_alpha).map(|k| top * k as f64 / (n_alpha - 1) as f64).collect();
        // points just inside the edge
        if edge > 0.0 {
            alphas.extend([edge * (1.0 - 1e-9), edge]);
        }
        for alpha in alphas {
            g.points += 1;
            if phi(alpha.sqrt()) < 1.0 - gamma {
                g.checked += 1;
                let m = cap - alpha;
                if m <= 0.0 {
                    g.violations += 1;
                }
                if m < g.min_margin {
                    g.min_margin = m;
                    g.argmin = [gamma, alpha, 0.0, 0.0];
                }
            }
        }
    }
    g
}

// Largest α with Φ(√α) < 1 − γ, up to bisection precision.
fn bisect_edge(gamma: f64, cap: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi(mid.sqrt()) < 1.0 - gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Φ(√(α+Δ)) − Φ(√α) ≥ the lemma bound over admissible grids, with
/// Δ ∈ {Δ₀, 2Δ₀, Δ₀ + 1}.
pub fn check_lower_bound(n_gamma: usize, n_alpha: usize, n_delta: usize) -> LemmaGrid {
    let mut g = LemmaGrid {
        points: 0,
        checked: 0,
        min_margin: f64::INFINITY,
        argmin: [0.0; 4],
        violations: 0,
    };
    for i in 1..n_gamma {
        let gamma = 0.5 * i as f64 / n_gamma as f64;
        let cap = -2.0 * (2.0 * gamma).ln();
        for k in 1..=n_alpha {
            let alpha = cap * k as f64 / (n_alpha + 1) as f64;
            for j in 0..n_delta {
                let delta0 = 10f64.powf(-4.0 + 6.0 * j as f64 / (n_delta - 1) as f64);
                let rhs = lemma_lower_bound(gamma, delta0);
                for delta in [delta0, 2.0 * delta0, delta0 + 1.0] {
                    g.points += 1;
                    g.checked += 1;
                    let lhs = phi((alpha + delta).sqrt()) - phi(alpha.sqrt());
                    let m = lhs - rhs;
                    if m < 0.0 {
                        g.violations += 1;
                    }
                    if m < g.min_margin {
                        g.min_margin = m;
                        g.argmin = [gamma, alpha, delta0, delta];
                    }
                }
            }
        }
    }
    g
}

/// Default grids: 200×80 for the inverting lemma and 40×25×20×3 for the
/// lower bound, about 76,000 points in total.
pub fn lemma_checks() -> LemmaReport {
    LemmaReport {
        inverting: check_inverting(200, 80),
        lower_bound: check_lower_bound(41, 25, 20),
    }
}
