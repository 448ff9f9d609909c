//! The acquisition round loop and its selection strategies.
//!
//! Each round refits the scoring rule on the owned plus acquired
//! features, measures per-group AUC and bias, and if the bias exceeds the
//! tolerance buys the candidate chosen by the strategy. Candidates are
//! judged on the 2-dim (S, Z) reduction, where S is the current score.

use crate::auc::{self, bias, disadvantaged, empirical_auc, first_coordinate_auc, fld_auc, pair_auc};
use crate::bounds;
use crate::error::{Error, Result};
use crate::moments::{overall_ssr, overall_ssr_columns, pearson, ssr2, ssr_columns, ClassStats, Group, GroupedColumns};
use crate::noisy::{self, NoisePlan};
use crate::scoring::{self, LogisticOptions, ScoringKind, ScoringRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Acquisition objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "weight")]
pub enum Strategy {
    FairAuc,
    MaxAuc,
    MinBias,
    Random,
    /// w · disadvantaged-group AUC + (1 − w) · overall objective.
    Weighted(f64),
    /// (1 − w) · overall objective − w · bias.
    BiasPenalty(f64),
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::FairAuc => "fair-auc".into(),
            Strategy::MaxAuc => "max-auc".into(),
            Strategy::MinBias => "min-bias".into(),
            Strategy::Random => "random".into(),
            Strategy::Weighted(w) => format!("weighted({w})"),
            Strategy::BiasPenalty(w) => format!("bias-penalty({w})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::Weighted(w) | Strategy::BiasPenalty(w) if !(0.0..=1.0).contains(&w) => {
                Err(crate::error::domain(format!("strategy weight {w} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// How many features one intervention buys, and how a pair is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Batch {
    Single,
    /// Best pair by the 3-dim FLD AUC of (S, Zi, Zj).
    PairSimultaneous,
    /// Best single feature, then the one least correlated with it.
    PairSequential,
}

/// Where per-group AUCs for bias identification come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AucSource {
    /// Mann–Whitney AUC of the scores.
    Empirical,
    /// Binormal AUC from the score's class moments.
    Analytic,
}

/// Configuration plus progress of an acquisition run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionState {
    pub round: usize,
    /// Features available before any acquisition.
    pub owned: Vec<usize>,
    /// Q(t), in acquisition order.
    pub acquired: Vec<usize>,
    pub scoring: ScoringKind,
    pub use_protected: bool,
    pub epsilon: f64,
    pub zero_correlation: bool,
    pub batch: Batch,
    pub noisy: bool,
    pub auc_source: AucSource,
    pub ridge: f64,
    pub logistic: LogisticOptions,
    pub seed: u64,
}

impl AcquisitionState {
    /// Defaults: logistic scores per group, ε = 1e-6, single features.
    pub fn new(owned: Vec<usize>, seed: u64) -> Self {
        AcquisitionState {
            round: 0,
            owned,
            acquired: Vec::new(),
            scoring: ScoringKind::Logistic,
            use_protected: true,
            epsilon: 1e-6,
            zero_correlation: false,
            batch: Batch::Single,
            noisy: false,
            auc_source: AucSource::Empirical,
            ridge: 0.0,
            logistic: LogisticOptions::default(),
            seed,
        }
    }

    /// Owned followed by acquired features.
    pub fn features(&self) -> Vec<usize> {
        let mut f = self.owned.clone();
        f.extend(&self.acquired);
        f
    }

    /// Unacquired feature indices, ascending.
    pub fn candidates(&self, n_features: usize) -> Vec<usize> {
        (0..n_features)
            .filter(|j| !self.owned.contains(j) && !self.acquired.contains(j))
            .collect()
    }
}

/// Outcome of one round, after refitting on Q(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Features bought in this round; empty for the baseline.
    pub features: Vec<usize>,
    pub auc_a: f64,
    pub auc_b: f64,
    pub auc_all: f64,
    pub bias: f64,
    pub disadvantaged: Group,
    /// Whether bias exceeds ε, i.e. whether another round is warranted.
    pub intervention: bool,
    /// Improvement lower bound for the group that was disadvantaged when
    /// these features were chosen.
    pub theory_bound: Option<f64>,
    /// Noise mixing weight when the noisy variant was used.
    pub lambda: Option<f64>,
}

/// AUCs and bias of the current score.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub auc_a: f64,
    pub auc_b: f64,
    pub auc_all: f64,
    pub bias: f64,
    pub disadvantaged: Group,
}

/// A strategy's pick for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub features: Vec<usize>,
    /// Strategy objective at the pick.
    pub objective: f64,
    pub theory_bound: Option<f64>,
    /// Candidate (or pair, or correlation) evaluations performed.
    pub evaluations: usize,
}

/// Fits the rule on the state's features and scores `eval`. With no
/// features at all the score is identically zero.
pub fn fit_scores(
    state: &AcquisitionState,
    train: &GroupedColumns,
    evals: &[&GroupedColumns],
) -> Result<(Option<ScoringRule>, Vec<Vec<f64>>)> {
    let feats = state.features();
    if feats.is_empty() {
        return Ok((None, evals.iter().map(|d| vec![0.0; d.n_rows()]).collect()));
    }
    let rule = scoring::fit(
        state.scoring,
        train,
        &feats,
        state.use_protected,
        state.ridge,
        state.logistic,
    )?;
    let mut out = Vec::with_capacity(evals.len());
    for d in evals {
        out.push(scoring::score(&rule, d, &feats)?.values);
    }
    Ok((Some(rule), out))
}

/// Per-group and overall AUC of `scores`, bias and the disadvantaged group.
pub fn identify_bias(state: &AcquisitionState, data: &GroupedColumns, scores: &[f64]) -> Result<BiasReport> {
    let (auc_a, auc_b, auc_all) = match state.auc_source {
        AucSource::Empirical => {
            let per_group = |g: Group| -> Result<f64> {
                let rows = data.group_rows(g);
                let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
                let y: Vec<u8> = rows.iter().map(|&i| data.classes()[i]).collect();
                empirical_auc(&s, &y)
            };
            (
                per_group(Group::A)?,
                per_group(Group::B)?,
                empirical_auc(scores, data.classes())?,
            )
        }
        AucSource::Analytic => (
            first_coordinate_auc(&ssr_columns(data, &[scores], Group::A)?),
            first_coordinate_auc(&ssr_columns(data, &[scores], Group::B)?),
            first_coordinate_auc(&overall_ssr_columns(data, &[scores])?),
        ),
    };
    Ok(BiasReport {
        auc_a,
        auc_b,
        auc_all,
        bias: bias(auc_a, auc_b)?,
        disadvantaged: disadvantaged(auc_a, auc_b),
    })
}

fn candidate_stats(
    state: &AcquisitionState,
    data: &GroupedColumns,
    scores: &[f64],
    feature: usize,
    g: Group,
) -> Result<ClassStats> {
    let st = ssr2(data.feature(feature), g, scores, data)?;
    Ok(if state.zero_correlation {
        st.without_score_covariance()
    } else {
        st
    })
}

/// pair_auc of (S, Z_ℓ) for group `g` for every unacquired ℓ. Candidates
/// whose statistics cannot be formed are skipped.
pub fn evaluate_candidates(
    state: &AcquisitionState,
    data: &GroupedColumns,
    scores: &[f64],
    g: Group,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for l in state.candidates(data.n_features()) {
        if let Ok(v) = candidate_stats(state, data, scores, l, g).and_then(|st| pair_auc(&st, state.ridge)) {
            out.push((l, v));
        }
    }
    if out.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    Ok(out)
}

/// Everything strategies need to know about one candidate.
#[derive(Debug, Clone)]
struct CandidateView {
    feature: usize,
    stats: [ClassStats; 2],
    pair: [f64; 2],
    pooled: Option<f64>,
}

fn candidate_views(state: &AcquisitionState, data: &GroupedColumns, scores: &[f64]) -> Result<Vec<CandidateView>> {
    let mut out = Vec::new();
    for l in state.candidates(data.n_features()) {
        let view = (|| -> Result<CandidateView> {
            let sa = candidate_stats(state, data, scores, l, Group::A)?;
            let sb = candidate_stats(state, data, scores, l, Group::B)?;
            let pair = [pair_auc(&sa, state.ridge)?, pair_auc(&sb, state.ridge)?];
            let pooled = if state.use_protected {
                None
            } else {
                let mut st = overall_ssr(data, data.feature(l), scores)?;
                if state.zero_correlation {
                    st = st.without_score_covariance();
                }
                Some(pair_auc(&st, state.ridge)?)
            };
            Ok(CandidateView {
                feature: l,
                stats: [sa, sb],
                pair,
                pooled,
            })
        })();
        if let Ok(v) = view {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    Ok(out)
}

fn overall_objective(v: &CandidateView, data: &GroupedColumns) -> f64 {
    match v.pooled {
        Some(p) => p,
        None => data.group_fraction(Group::A) * v.pair[0] + data.group_fraction(Group::B) * v.pair[1],
    }
}

// Highest value wins; earlier (lower-index) candidates win ties.
fn argmax<T>(items: &[T], mut f: impl FnMut(&T) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in items.iter().enumerate() {
        let v = f(it);
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Seeded generator for one purpose in one round.
pub fn round_rng(seed: u64, round: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | round as u64);
    rng
}

pub(crate) const RANDOM_STREAM: u64 = 1;
pub(crate) const NOISE_STREAM: u64 = 2;
pub(crate) const SPLIT_STREAM: u64 = 3;
pub(crate) const BOOTSTRAP_STREAM: u64 = 4;
pub(crate) const OWNED_STREAM: u64 = 5;

/// Largest improvement bound for group `g` over all candidates in premise.
fn best_bound(views: &[CandidateView], g: Group) -> Option<f64> {
    views
        .iter()
        .filter_map(|v| bounds::candidate_inputs(&v.stats[g.index()], v.feature).ok().flatten())
        .filter(|b| b.in_premise())
        .map(|b| bounds::improvement_bound(&b))
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
}

/// Picks one feature according to `strategy` for the disadvantaged group
/// in `report`.
pub fn select_feature(
    state: &AcquisitionState,
    data: &GroupedColumns,
    scores: &[f64],
    report: &BiasReport,
    strategy: &Strategy,
) -> Result<Selection> {
    strategy.validate()?;
    let views = candidate_views(state, data, scores)?;
    let g = report.disadvantaged;
    let gi = g.index();
    let pick = match *strategy {
        Strategy::FairAuc => argmax(&views, |v| v.pair[gi]),
        Strategy::MaxAuc => argmax(&views, |v| overall_objective(v, data)),
        Strategy::MinBias => argmax(&views, |v| -bias(v.pair[0], v.pair[1]).unwrap_or(f64::NAN)).map(|(i, b)| (i, -b)),
        Strategy::Weighted(w) => argmax(&views, |v| w * v.pair[gi] + (1.0 - w) * overall_objective(v, data)),
        Strategy::BiasPenalty(w) => argmax(&views, |v| {
            (1.0 - w) * overall_objective(v, data) - w * bias(v.pair[0], v.pair[1]).unwrap_or(f64::NAN)
        }),
        Strategy::Random => {
            let mut rng = round_rng(state.seed, state.round, RANDOM_STREAM);
            let i = rng.random_range(0..views.len());
            Some((i, views[i].pair[gi]))
        }
    };
    let (i, objective) = pick.ok_or(Error::NoViableCandidate)?;
    Ok(Selection {
        features: vec![views[i].feature],
        objective,
        theory_bound: best_bound(&views, g),
        evaluations: views.len(),
    })
}

/// Best unordered pair for group `g` by the FLD AUC of (S, Zi, Zj).
pub fn select_pair_simultaneous(
    state: &AcquisitionState,
    data: &GroupedColumns,
    scores: &[f64],
    g: Group,
) -> Result<Selection> {
    let cands = state.candidates(data.n_features());
    if cands.len() < 2 {
        return Err(Error::NoViableCandidate);
    }
    let mut cols: Vec<&[f64]> = vec![scores];
    cols.extend(cands.iter().map(|&l| data.feature(l)));
    let mut all = ssr_columns(data, &cols, g)?;
    if state.zero_correlation {
        all = all.without_score_covariance();
    }
    let mut best: Option<(usize, usize, f64)> = None;
    let mut evaluations = 0;
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            evaluations += 1;
            let st = all.marginal(&[0, i + 1, j + 1]);
            if let Ok(v) = fld_auc(&st, state.ridge) {
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((i, j, v));
                }
            }
        }
    }
    let (i, j, v) = best.ok_or(Error::NoViableCandidate)?;
    Ok(Selection {
        features: vec![cands[i], cands[j]],
        objective: v,
        theory_bound: None,
        evaluations,
    })
}

/// FairAUC pick for group `g`, then the remaining candidate with the
/// smallest absolute unconditional correlation to it.
pub fn select_pair_sequential(
    state: &AcquisitionState,
    data: &GroupedColumns,
    scores: &[f64],
    g: Group,
) -> Result<Selection> {
    let evals = evaluate_candidates(state, data, scores, g)?;
    if state.candidates(data.n_features()).len() < 2 {
        return Err(Error::NoViableCandidate);
    }
    let (fi, v) = argmax(&evals, |e| e.1).ok_or(Error::NoViableCandidate)?;
    let first = evals[fi].0;
    let rest: Vec<usize> = state
        .candidates(data.n_features())
        .into_iter()
        .filter(|&l| l != first)
        .collect();
    let (si, _) =
        argmax(&rest, |&l| -pearson(data.feature(first), data.feature(l)).abs()).ok_or(Error::NoViableCandidate)?;
    Ok(Selection {
        features: vec![first, rest[si]],
        objective: v,
        theory_bound: None,
        evaluations: rest.len(),
    })
}

/// Row split for out-of-sample evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

impl Split {
    /// Stratified by (group, class): a `fraction` of each cell, chosen
    /// uniformly with the given seed, is held out for evaluation.
    pub fn stratified(data: &GroupedColumns, fraction: f64, seed: u64) -> Result<Split> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(crate::error::domain("holdout fraction must lie in [0, 1)"));
        }
        let mut rng = round_rng(seed, 0, SPLIT_STREAM);
        let (mut train, mut eval) = (Vec::new(), Vec::new());
        for g in Group::BOTH {
            for y in 0..2u8 {
                let mut rows = data.rows(g, y).to_vec();
                let k = (fraction * rows.len() as f64).round() as usize;
                for i in 0..k {
                    let j = rng.random_range(i..rows.len());
                    rows.swap(i, j);
                }
                eval.extend_from_slice(&rows[..k]);
                train.extend_from_slice(&rows[k..]);
            }
        }
        train.sort_unstable();
        eval.sort_unstable();
        Ok(Split { train, eval })
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub state: AcquisitionState,
    pub noise: Vec<NoisePlan>,
    pub perfect_separation: bool,
    /// Per record, the scores behind its reported AUCs (evaluation rows
    /// only when split).
    pub scores: Vec<Vec<f64>>,
}

/// Runs up to `rounds` interventions with in-sample evaluation.
pub fn run(
    state: &AcquisitionState,
    data: &GroupedColumns,
    strategy: &Strategy,
    rounds: usize,
) -> Result<Vec<RoundRecord>> {
    Ok(run_detailed(state, data, strategy, rounds, None)?.records)
}

/// Runs up to `rounds` interventions. With a split the rule is fitted
/// and candidates are judged on the training rows while reported AUCs
/// come from the evaluation rows.
pub fn run_detailed(
    state: &AcquisitionState,
    data: &GroupedColumns,
    strategy: &Strategy,
    rounds: usize,
    split: Option<&Split>,
) -> Result<RunOutput> {
    strategy.validate()?;
    if state.epsilon < 0.0 {
        return Err(crate::error::domain("epsilon must be nonnegative"));
    }
    let mut st = state.clone();
    st.round = 0;
    let mut data = data.clone();
    let mut records = Vec::with_capacity(rounds + 1);
    let mut noise = Vec::new();
    let mut separated = false;
    let mut reported = Vec::with_capacity(rounds + 1);
    let mut pending: (Vec<usize>, Option<f64>, Option<f64>) = (Vec::new(), None, None);
    loop {
        let (train, eval) = match split {
            Some(s) => (data.subset(&s.train)?, Some(data.subset(&s.eval)?)),
            None => (data.clone(), None),
        };
        let targets: Vec<&GroupedColumns> = match &eval {
            Some(e) => vec![&train, e],
            None => vec![&train],
        };
        let (rule, scores) = fit_scores(&st, &train, &targets)?;
        separated |= rule.as_ref().is_some_and(|r| r.perfect_separation);
        let train_scores = &scores[0];
        let report = match &eval {
            Some(e) => identify_bias(&st, e, &scores[1])?,
            None => identify_bias(&st, &train, train_scores)?,
        };
        let intervention = report.bias > st.epsilon;
        reported.push(scores.last().cloned().unwrap_or_default());
        records.push(RoundRecord {
            round: st.round,
            features: std::mem::take(&mut pending.0),
            auc_a: report.auc_a,
            auc_b: report.auc_b,
            auc_all: report.auc_all,
            bias: report.bias,
            disadvantaged: report.disadvantaged,
            intervention,
            theory_bound: pending.1.take(),
            lambda: pending.2.take(),
        });
        if !intervention || st.round >= rounds || st.candidates(data.n_features()).is_empty() {
            break;
        }
        let g = report.disadvantaged;
        let sel = match st.batch {
            Batch::Single => select_feature(&st, &train, train_scores, &report, strategy)?,
            Batch::PairSimultaneous => select_pair_simultaneous(&st, &train, train_scores, g)?,
            Batch::PairSequential => select_pair_sequential(&st, &train, train_scores, g)?,
        };
        let mut lambda = None;
        if st.noisy {
            let l = sel.features[0];
            let stats = [
                candidate_stats(&st, &train, train_scores, l, Group::A)?,
                candidate_stats(&st, &train, train_scores, l, Group::B)?,
            ];
            let plan = noisy::plan_for_candidate(&stats[0], &stats[1], st.ridge)?;
            let mask: Vec<bool> = data.groups().iter().map(|&gr| gr == plan.advantaged).collect();
            let mut rng = round_rng(st.seed, st.round, NOISE_STREAM);
            let col = noisy::noisy_feature(data.feature(l), &mask, plan.lambda, &mut rng)?;
            data = data.with_feature(l, col)?;
            lambda = Some(plan.lambda);
            noise.push(plan);
        }
        st.acquired.extend(&sel.features);
        st.round += 1;
        pending = (sel.features, sel.theory_bound, lambda);
    }
    Ok(RunOutput {
        records,
        state: st,
        noise,
        perfect_separation: separated,
        scores: reported,
    })
}

/// Group-size-weighted analytic objective φ_a·AUC_a + φ_b·AUC_b of the
/// current score, the quantity maxAUC increases.
pub fn weighted_analytic_auc(data: &GroupedColumns, scores: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for g in Group::BOTH {
        let st = ssr_columns(data, &[scores], g)?;
        h += data.group_fraction(g) * auc::first_coordinate_auc(&st);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_data() -> GroupedColumns {
        // x0 informative for both groups, x1 pure noise, x2 = x0 exactly
        let n = 400;
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        let (mut group, mut class) = (Vec::new(), Vec::new());
        for i in 0..n {
            let y = (i % 2) as u8;
            let g = if i % 5 == 0 { Group::B } else { Group::A };
            let t = ((i * 37) % 101) as f64 / 101.0 - 0.5;
            let u = ((i * 53) % 97) as f64 / 97.0 - 0.5;
            cols[0].push(y as f64 + 2.0 * t);
            cols[1].push(u);
            cols[2].push(y as f64 + 2.0 * t);
            group.push(g);
            class.push(y);
        }
        GroupedColumns::new(vec!["x0".into(), "x1".into(), "x2".into()], cols, group, class).unwrap()
    }

    #[test]
    fn tolerance_one_gives_baseline_only() {
        let d = grid_data();
        let mut st = AcquisitionState::new(vec![1], 3);
        st.epsilon = 1.0;
        let recs = run(&st, &d, &Strategy::FairAuc, 10).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].features.is_empty());
        assert!(!recs[0].intervention);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0], |&v| v), Some((1, 3.0)));
        assert_eq!(argmax(&[f64::NAN, 2.0], |&v| v), Some((1, 2.0)));
    }

    #[test]
    fn copy_of_score_adds_nothing() {
        let d = grid_data();
        let st = AcquisitionState::new(vec![0], 1);
        let scores = d.feature(0).to_vec();
        let evals = evaluate_candidates(&st, &d, &scores, Group::A).unwrap();
        let base = first_coordinate_auc(&ssr_columns(&d, &[&scores], Group::A).unwrap());
        let copy = evals.iter().find(|e| e.0 == 2).unwrap().1;
        assert!((copy - base).abs() < 1e-6);
    }

    #[test]
    fn random_is_reproducible() {
        let d = grid_data();
        let st = AcquisitionState::new(vec![1], 42);
        let a = run(&st, &d, &Strategy::Random, 2).unwrap();
        let b = run(&st, &d, &Strategy::Random, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_weight_rejected() {
        let d = grid_data();
        let st = AcquisitionState::new(vec![1], 1);
        assert!(run(&st, &d, &Strategy::Weighted(1.5), 1).is_err());
    }
}
