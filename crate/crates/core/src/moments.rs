//! Class-conditional summary statistics per protected group.

use crate::error::{domain, Error, Result};
use crate::numkit::{exact_sum, SymMatrix};
use serde::{Deserialize, Serialize};

/// Protected group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn label(self) -> char {
        match self {
            Group::A => 'a',
            Group::B => 'b',
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Feature columns plus protected-group and binary class columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedColumns {
    names: Vec<String>,
    features: Vec<Vec<f64>>,
    group: Vec<Group>,
    class: Vec<u8>,
    // row indices per [group][class]
    cells: [[Vec<usize>; 2]; 2],
}

impl GroupedColumns {
    pub fn new(names: Vec<String>, features: Vec<Vec<f64>>, group: Vec<Group>, class: Vec<u8>) -> Result<Self> {
        let n = group.len();
        if class.len() != n {
            return Err(domain("group and class columns differ in length"));
        }
        if names.len() != features.len() {
            return Err(domain("one name per feature column required"));
        }
        for (name, col) in names.iter().zip(&features) {
            if col.len() != n {
                return Err(domain(format!("column {name} has {} rows, expected {n}", col.len())));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value in column {name} row {i}")));
            }
        }
        let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
        for i in 0..n {
            if class[i] > 1 {
                return Err(domain(format!("class label {} at row {i} is not 0/1", class[i])));
            }
            cells[group[i].index()][class[i] as usize].push(i);
        }
        Ok(GroupedColumns {
            names,
            features,
            group,
            class,
            cells,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.group.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j]
    }

    pub fn groups(&self) -> &[Group] {
        &self.group
    }

    pub fn classes(&self) -> &[u8] {
        &self.class
    }

    /// Row indices with A = g and Y = y.
    pub fn rows(&self, g: Group, y: u8) -> &[usize] {
        &self.cells[g.index()][y as usize]
    }

    pub fn group_size(&self, g: Group) -> usize {
        self.rows(g, 0).len() + self.rows(g, 1).len()
    }

    /// φ_g, the fraction of rows in group g.
    pub fn group_fraction(&self, g: Group) -> f64 {
        self.group_size(g) as f64 / self.n_rows() as f64
    }

    /// Row indices of group g in original order.
    pub fn group_rows(&self, g: Group) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.group[i] == g).collect()
    }

    /// Copy with column `j` replaced.
    pub fn with_feature(&self, j: usize, col: Vec<f64>) -> Result<Self> {
        let mut features = self.features.clone();
        if col.len() != self.n_rows() {
            return Err(domain("replacement column has the wrong length"));
        }
        features[j] = col;
        GroupedColumns::new(self.names.clone(), features, self.group.clone(), self.class.clone())
    }

    /// Copy restricted to `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let features = self
            .features
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        GroupedColumns::new(
            self.names.clone(),
            features,
            rows.iter().map(|&i| self.group[i]).collect(),
            rows.iter().map(|&i| self.class[i]).collect(),
        )
    }

    fn require_cells(&self, g: Group) -> Result<()> {
        for y in 0..2u8 {
            let count = self.rows(g, y).len();
            if count < 2 {
                return Err(Error::InsufficientSamples {
                    group: g.label(),
                    class: y,
                    count,
                });
            }
        }
        Ok(())
    }
}

/// Class-conditional means and covariances (n−1 divisor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub sigma0: SymMatrix,
    pub sigma1: SymMatrix,
    /// Sample counts; zero for exact population moments.
    pub n0: usize,
    pub n1: usize,
}

impl ClassStats {
    /// Exact moments, with counts recorded as zero.
    pub fn from_moments(mu0: Vec<f64>, mu1: Vec<f64>, sigma0: SymMatrix, sigma1: SymMatrix) -> Self {
        assert!(
            mu0.len() == mu1.len() && mu0.len() == sigma0.dim() && sigma0.dim() == sigma1.dim(),
            "moment dimensions disagree"
        );
        ClassStats {
            mu0,
            mu1,
            sigma0,
            sigma1,
            n0: 0,
            n1: 0,
        }
    }

    /// 2-dim (S, Z) stats from scalars: mean gaps, class-summed
    /// variances and covariance split evenly across classes.
    pub fn pair_from_sums(dmu_s: f64, dv: f64, var_s: f64, var_z: f64, cov: f64) -> Self {
        let half =
            |a: f64, b: f64, c: f64| SymMatrix::from_rows(&[vec![a / 2.0, c / 2.0], vec![c / 2.0, b / 2.0]]).unwrap();
        ClassStats::from_moments(
            vec![0.0, 0.0],
            vec![dmu_s, dv],
            half(var_s, var_z, cov),
            half(var_s, var_z, cov),
        )
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    /// μ₁ − μ₀.
    pub fn delta_mu(&self) -> Vec<f64> {
        self.mu1.iter().zip(&self.mu0).map(|(a, b)| a - b).collect()
    }

    /// Σ₀ + Σ₁.
    pub fn sigma_sum(&self) -> SymMatrix {
        self.sigma0.add(&self.sigma1)
    }

    /// Stats of the coordinates in `idx`.
    pub fn marginal(&self, idx: &[usize]) -> ClassStats {
        ClassStats {
            mu0: idx.iter().map(|&i| self.mu0[i]).collect(),
            mu1: idx.iter().map(|&i| self.mu1[i]).collect(),
            sigma0: self.sigma0.submatrix(idx),
            sigma1: self.sigma1.submatrix(idx),
            n0: self.n0,
            n1: self.n1,
        }
    }

    /// Copy with every covariance between coordinate 0 and the others
    /// set to zero, i.e. the score treated as independent of the rest.
    pub fn without_score_covariance(&self) -> ClassStats {
        let mut out = self.clone();
        for k in 1..self.dim() {
            out.sigma0.set(0, k, 0.0);
            out.sigma1.set(0, k, 0.0);
        }
        out
    }

    /// Rescales coordinate 0 by `c`.
    pub fn scale_first(&self, c: f64) -> ClassStats {
        let mut out = self.clone();
        out.mu0[0] *= c;
        out.mu1[0] *= c;
        for s in [&mut out.sigma0, &mut out.sigma1] {
            for k in 0..self.dim() {
                let f = if k == 0 { c * c } else { c };
                let v = s.get(0, k) * f;
                s.set(0, k, v);
            }
        }
        out
    }
}

// Sums are correctly rounded so the moments ignore row order.
fn cell_moments(cols: &[&[f64]], rows: &[usize]) -> (Vec<f64>, SymMatrix) {
    let d = cols.len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = cols.iter().map(|c| exact_sum(rows.iter().map(|&i| c[i])) / n).collect();
    let mut cov = SymMatrix::zeros(d);
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .zip(&mean)
        .map(|(c, m)| rows.iter().map(|&i| c[i] - m).collect())
        .collect();
    for a in 0..d {
        for b in 0..=a {
            let s = exact_sum(centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y));
            cov.set(a, b, s / (n - 1.0));
        }
    }
    (mean, cov)
}

fn stats_over(cols: &[&[f64]], r0: &[usize], r1: &[usize]) -> ClassStats {
    let (mu0, sigma0) = cell_moments(cols, r0);
    let (mu1, sigma1) = cell_moments(cols, r1);
    ClassStats {
        mu0,
        mu1,
        sigma0,
        sigma1,
        n0: r0.len(),
        n1: r1.len(),
    }
}

/// Per-group class statistics of arbitrary columns.
pub fn ssr_columns(data: &GroupedColumns, cols: &[&[f64]], g: Group) -> Result<ClassStats> {
    if cols.is_empty() {
        return Err(domain("no columns"));
    }
    if cols.iter().any(|c| c.len() != data.n_rows()) {
        return Err(domain("column length differs from the dataset"));
    }
    data.require_cells(g)?;
    Ok(stats_over(cols, data.rows(g, 0), data.rows(g, 1)))
}

/// Class statistics of the features in `feature_indices` for group `g`.
pub fn ssr(data: &GroupedColumns, feature_indices: &[usize], g: Group) -> Result<ClassStats> {
    if feature_indices.is_empty() {
        return Err(domain("empty feature index set"));
    }
    if let Some(&j) = feature_indices.iter().find(|&&j| j >= data.n_features()) {
        return Err(domain(format!("feature index {j} out of range")));
    }
    let cols: Vec<&[f64]> = feature_indices.iter().map(|&j| data.feature(j)).collect();
    ssr_columns(data, &cols, g)
}

/// 2-dim statistics over (S, Z) for group `g`; coordinate 0 is the score.
pub fn ssr2(aux: &[f64], g: Group, scores: &[f64], data: &GroupedColumns) -> Result<ClassStats> {
    ssr_columns(data, &[scores, aux], g)
}

/// Class statistics of arbitrary columns, pooling both groups.
pub fn overall_ssr_columns(data: &GroupedColumns, cols: &[&[f64]]) -> Result<ClassStats> {
    if cols.is_empty() {
        return Err(domain("no columns"));
    }
    if cols.iter().any(|c| c.len() != data.n_rows()) {
        return Err(domain("column length differs from the dataset"));
    }
    let mut pooled: [Vec<usize>; 2] = Default::default();
    for (y, cell) in pooled.iter_mut().enumerate() {
        let y = y as u8;
        *cell = (0..data.n_rows()).filter(|&i| data.class[i] == y).collect();
        if cell.len() < 2 {
            return Err(Error::InsufficientSamples {
                group: '*',
                class: y,
                count: cell.len(),
            });
        }
    }
    Ok(stats_over(cols, &pooled[0], &pooled[1]))
}

/// As [`ssr2`] but pooling both groups.
pub fn overall_ssr(data: &GroupedColumns, aux: &[f64], scores: &[f64]) -> Result<ClassStats> {
    overall_ssr_columns(data, &[scores, aux])
}

/// Unconditional Pearson correlation of two columns.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Exact binormal moments of every column for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub sigma0: SymMatrix,
    pub sigma1: SymMatrix,
}

impl Population {
    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    /// Moments of the columns in `idx`.
    pub fn stats(&self, idx: &[usize]) -> ClassStats {
        ClassStats::from_moments(
            idx.iter().map(|&i| self.mu0[i]).collect(),
            idx.iter().map(|&i| self.mu1[i]).collect(),
            self.sigma0.submatrix(idx),
            self.sigma1.submatrix(idx),
        )
    }

    /// Moments of (wᵀX_owned, Z_extra...), with the score first.
    pub fn projected(&self, w: &[f64], owned: &[usize], extra: &[usize]) -> ClassStats {
        assert_eq!(w.len(), owned.len(), "weight length differs from owned set");
        let d = 1 + extra.len();
        let mut moments = Vec::with_capacity(2);
        for (mu, sigma) in [(&self.mu0, &self.sigma0), (&self.mu1, &self.sigma1)] {
            let mut m = vec![0.0; d];
            m[0] = w.iter().zip(owned).map(|(wk, &k)| wk * mu[k]).sum();
            for (e, &z) in extra.iter().enumerate() {
                m[e + 1] = mu[z];
            }
            let mut s = SymMatrix::zeros(d);
            let mut var_s = 0.0;
            for (a, &ka) in owned.iter().enumerate() {
                for (b, &kb) in owned.iter().enumerate() {
                    var_s += w[a] * w[b] * sigma.get(ka, kb);
                }
            }
            s.set(0, 0, var_s);
            for (e, &z) in extra.iter().enumerate() {
                let c: f64 = w.iter().zip(owned).map(|(wk, &k)| wk * sigma.get(k, z)).sum();
                s.set(0, e + 1, c);
                for (f, &z2) in extra.iter().enumerate().take(e + 1) {
                    s.set(e + 1, f + 1, sigma.get(z, z2));
                }
            }
            moments.push((m, s));
        }
        let (m1, s1) = moments.pop().unwrap();
        let (m0, s0) = moments.pop().unwrap();
        ClassStats::from_moments(m0, m1, s0, s1)
    }
}
