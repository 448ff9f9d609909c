//! Scoring rules that collapse the acquired features into one score.
//!
//! Scores are always the linear predictor before any link function. AUC
//! only depends on the ranking, so the logistic sigmoid would change
//! nothing but the numerics.

use crate::auc::fld_direction;
use crate::error::{domain, Result};
use crate::moments::{overall_ssr_columns, ssr_columns, Group, GroupedColumns};
use crate::numkit::{cholesky, SymMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringKind {
    Fld,
    Logistic,
}

/// Weights and intercept of one linear predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    fn predict(&self, data: &GroupedColumns, features: &[usize], row: usize) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, &j)| w * data.feature(j)[row])
                .sum::<f64>()
    }
}

/// A fitted GLM: one pooled model, or one per group when `use_protected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringRule {
    pub kind: ScoringKind,
    pub use_protected: bool,
    /// Feature indices the weights refer to, in weight order.
    pub features: Vec<usize>,
    /// `[pooled]` or `[group a, group b]`.
    pub models: Vec<LinearModel>,
    pub ridge: f64,
    /// Set when a logistic fit found the training rows linearly separable.
    pub perfect_separation: bool,
}

impl ScoringRule {
    pub fn model_for(&self, g: Group) -> &LinearModel {
        if self.use_protected {
            &self.models[g.index()]
        } else {
            &self.models[0]
        }
    }
}

/// The score S for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumn {
    pub values: Vec<f64>,
}

/// Logistic fitting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Added to the Hessian diagonal only; the fixed point stays the MLE.
    pub stabilizer: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iters: 100,
            tol: 1e-8,
            stabilizer: 1e-6,
        }
    }
}

fn check_features(data: &GroupedColumns, acquired: &[usize]) -> Result<()> {
    if acquired.is_empty() {
        return Err(domain("scoring needs at least one feature"));
    }
    if let Some(j) = acquired.iter().find(|&&j| j >= data.n_features()) {
        return Err(domain(format!("feature index {j} out of range")));
    }
    Ok(())
}

/// FLD weights (Σ₀+Σ₁)⁻¹Δμ per group or pooled; the intercept centres the
/// score between the class means.
pub fn fit_fld(data: &GroupedColumns, acquired: &[usize], use_protected: bool, ridge: f64) -> Result<ScoringRule> {
    check_features(data, acquired)?;
    let cols: Vec<&[f64]> = acquired.iter().map(|&j| data.feature(j)).collect();
    let stats = if use_protected {
        vec![ssr_columns(data, &cols, Group::A)?, ssr_columns(data, &cols, Group::B)?]
    } else {
        vec![overall_ssr_columns(data, &cols)?]
    };
    let mut models = Vec::with_capacity(stats.len());
    for st in &stats {
        let weights = fld_direction(st, ridge)?;
        let mid: f64 = weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * 0.5 * (st.mu0[k] + st.mu1[k]))
            .sum();
        models.push(LinearModel {
            weights,
            intercept: -mid,
        });
    }
    Ok(ScoringRule {
        kind: ScoringKind::Fld,
        use_protected,
        features: acquired.to_vec(),
        models,
        ridge,
        perfect_separation: false,
    })
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Newton–IRLS on standardized features. Returns the model in original
/// units and whether the rows were linearly separated by it.
fn irls(
    data: &GroupedColumns,
    features: &[usize],
    rows: &[usize],
    opts: LogisticOptions,
) -> Result<(LinearModel, bool)> {
    let d = features.len();
    let n = rows.len() as f64;
    let y: Vec<f64> = rows.iter().map(|&i| data.classes()[i] as f64).collect();
    if y.iter().all(|&v| v == 1.0) || y.iter().all(|&v| v == 0.0) {
        return Err(domain("logistic fit needs both classes"));
    }
    let mut means = vec![0.0; d];
    let mut sds = vec![1.0; d];
    // design columns, intercept first
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    x.push(vec![1.0; rows.len()]);
    for (k, &j) in features.iter().enumerate() {
        let col = data.feature(j);
        let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
        let v = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / n;
        means[k] = m;
        if v > 0.0 {
            sds[k] = v.sqrt();
        }
        x.push(rows.iter().map(|&i| (col[i] - m) / sds[k]).collect());
    }
    let p = d + 1;
    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; rows.len()];
    for _ in 0..opts.max_iters {
        let mut grad = vec![0.0; p];
        let mut hess = SymMatrix::zeros(p);
        let mut wts = vec![0.0; rows.len()];
        for r in 0..rows.len() {
            let pr = sigmoid(eta[r]);
            wts[r] = pr * (1.0 - pr);
            let resid = y[r] - pr;
            for a in 0..p {
                grad[a] += x[a][r] * resid;
            }
        }
        for a in 0..p {
            for b in 0..=a {
                let s: f64 = (0..rows.len()).map(|r| x[a][r] * x[b][r] * wts[r]).sum();
                hess.set(a, b, s);
            }
        }
        let step = cholesky(&hess, opts.stabilizer)?.solve(&grad);
        let mut max_step: f64 = 0.0;
        for a in 0..p {
            beta[a] += step[a];
            max_step = max_step.max(step[a].abs());
        }
        for (r, e) in eta.iter_mut().enumerate() {
            *e = (0..p).map(|a| beta[a] * x[a][r]).sum();
        }
        if !max_step.is_finite() {
            return Err(crate::error::Error::Numeric("logistic step diverged".into()));
        }
        if max_step < opts.tol {
            break;
        }
    }
    let (mut min_pos, mut max_neg) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, &e) in eta.iter().enumerate() {
        if y[r] == 1.0 {
            min_pos = min_pos.min(e);
        } else {
            max_neg = max_neg.max(e);
        }
    }
    let weights: Vec<f64> = (0..d).map(|k| beta[k + 1] / sds[k]).collect();
    let intercept = beta[0] - (0..d).map(|k| weights[k] * means[k]).sum::<f64>();
    Ok((LinearModel { weights, intercept }, min_pos > max_neg))
}

/// Maximum-likelihood logistic regression by IRLS.
pub fn fit_logistic(
    data: &GroupedColumns,
    acquired: &[usize],
    use_protected: bool,
    opts: LogisticOptions,
) -> Result<ScoringRule> {
    check_features(data, acquired)?;
    let row_sets: Vec<Vec<usize>> = if use_protected {
        Group::BOTH.iter().map(|&g| data.group_rows(g)).collect()
    } else {
        vec![(0..data.n_rows()).collect()]
    };
    let mut models = Vec::new();
    let mut separated = false;
    for rows in &row_sets {
        let (m, sep) = irls(data, acquired, rows, opts)?;
        models.push(m);
        separated |= sep;
    }
    Ok(ScoringRule {
        kind: ScoringKind::Logistic,
        use_protected,
        features: acquired.to_vec(),
        models,
        ridge: opts.stabilizer,
        perfect_separation: separated,
    })
}

/// Fits the rule of the requested kind.
pub fn fit(
    kind: ScoringKind,
    data: &GroupedColumns,
    acquired: &[usize],
    use_protected: bool,
    ridge: f64,
    opts: LogisticOptions,
) -> Result<ScoringRule> {
    match kind {
        ScoringKind::Fld => fit_fld(data, acquired, use_protected, ridge),
        ScoringKind::Logistic => fit_logistic(data, acquired, use_protected, opts),
    }
}

/// Linear predictor for every row, using the row's group model when the
/// rule is per-group.
pub fn score(rule: &ScoringRule, data: &GroupedColumns, acquired: &[usize]) -> Result<ScoreColumn> {
    if acquired != rule.features.as_slice() {
        return Err(domain("rule was fitted on a different feature set"));
    }
    if rule.models.iter().any(|m| m.weights.len() != acquired.len()) {
        return Err(domain("weight dimension differs from the feature set"));
    }
    if let Some(j) = acquired.iter().find(|&&j| j >= data.n_features()) {
        return Err(domain(format!("feature index {j} out of range")));
    }
    let values = (0..data.n_rows())
        .map(|i| rule.model_for(data.groups()[i]).predict(data, acquired, i))
        .collect();
    Ok(ScoreColumn { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auc::empirical_auc;

    fn toy(x: Vec<f64>, class: Vec<u8>, group: Vec<Group>) -> GroupedColumns {
        GroupedColumns::new(vec!["x".into()], vec![x], group, class).unwrap()
    }

    #[test]
    fn fld_single_feature_weight_is_gap_over_variance() {
        // class variances 0.5 each: Σ-sum = 1, so weight = Δμ = 2
        let d = toy(vec![-0.5, 0.5, 1.5, 2.5], vec![0, 0, 1, 1], vec![Group::A; 4]);
        let rule = fit_fld(&d, &[0], false, 0.0).unwrap();
        assert!((rule.models[0].weights[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_symmetric_data() {
        let x = vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -1.5, 1.5, 0.2, -0.2];
        let class = vec![0, 0, 1, 0, 1, 1, 0, 1, 0, 1];
        let mirrored: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut all_x = x.clone();
        all_x.extend(mirrored);
        let mut all_y = class.clone();
        all_y.extend(class.iter().map(|y| 1 - y));
        let n = all_x.len();
        let d = toy(all_x, all_y, vec![Group::A; n]);
        let rule = fit_logistic(&d, &[0], false, LogisticOptions::default()).unwrap();
        assert!(rule.models[0].weights[0] > 0.0);
        assert!(rule.models[0].intercept.abs() < 1e-10);
        assert!(!rule.perfect_separation);
    }

    #[test]
    fn logistic_separable_flags_and_ranks_perfectly() {
        let d = toy(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0, 0, 0, 1, 1, 1],
            vec![Group::A; 6],
        );
        let rule = fit_logistic(&d, &[0], false, LogisticOptions::default()).unwrap();
        assert!(rule.perfect_separation);
        let s = score(&rule, &d, &[0]).unwrap();
        assert_eq!(empirical_auc(&s.values, d.classes()).unwrap(), 1.0);
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let d = toy(vec![1.0, 2.0, 3.0], vec![0, 1, 0], vec![Group::A; 3]);
        let rule = ScoringRule {
            kind: ScoringKind::Fld,
            use_protected: false,
            features: vec![0],
            models: vec![LinearModel {
                weights: vec![0.0],
                intercept: 0.0,
            }],
            ridge: 0.0,
            perfect_separation: false,
        };
        assert_eq!(score(&rule, &d, &[0]).unwrap().values, vec![0.0; 3]);
        assert!(score(&rule, &d, &[0, 0]).is_err());
    }
}
