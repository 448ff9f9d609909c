//! Small dense symmetric linear algebra and the standard normal CDF.
//!
//! Matrices here are covariance matrices of a handful of features, so
//! everything is packed lower-triangular storage and O(n³) Cholesky.
//! Φ is evaluated through W. J. Cody's rational Chebyshev approximations
//! for erfc, which are accurate to roughly machine precision.

#![allow(clippy::excessive_precision)]

use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};

/// Dense symmetric matrix stored as its packed lower triangle, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    lower: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    /// All-zero matrix.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dim must be at least 1");
        SymMatrix {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from full rows. Only the lower triangle is read, but the
    /// upper triangle must agree with it to 1e-12 relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(domain("empty matrix"));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(domain(format!("row {i} has length {}, expected {dim}", row.len())));
            }
            for j in 0..=i {
                let (a, b) = (row[j], rows[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(domain(format!("matrix not symmetric at ({i},{j})")));
                }
                m.set(i, j, a);
            }
        }
        Ok(m)
    }

    /// Builds from a packed lower triangle of length dim(dim+1)/2.
    pub fn from_lower(dim: usize, lower: Vec<f64>) -> Result<Self> {
        if dim == 0 || lower.len() != dim * (dim + 1) / 2 {
            return Err(domain("packed lower triangle has the wrong length"));
        }
        Ok(SymMatrix { dim, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[packed(i, j)] = v;
    }

    pub fn packed_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Elementwise sum; panics on dimension mismatch.
    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            lower: self.lower.iter().map(|a| a * s).collect(),
        }
    }

    pub fn with_ridge(&self, ridge: f64) -> SymMatrix {
        let mut m = self.clone();
        for i in 0..self.dim {
            let v = m.get(i, i) + ridge;
            m.set(i, i, v);
        }
        m
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let mut m = SymMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().take(a + 1) {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// vᵀ M v.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mv = self.mul_vec(v);
        u.iter().zip(&mv).map(|(a, b)| a * b).sum()
    }
}

/// Lower-triangular L with L·Lᵀ equal to the factored (ridged) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
    ridge: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry L[i][j]; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[packed(i, j)]
        }
    }

    /// Ridge actually added to the diagonal, including an automatic retry.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Solves L y = b.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim, "dimension mismatch");
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut s = b[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.lower[packed(i, k)] * yk;
            }
            y[i] = s / self.lower[packed(i, i)];
        }
        y
    }

    /// Solves Lᵀ x = y.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim, "dimension mismatch");
        let n = self.dim;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.lower[packed(k, i)] * xk;
            }
            x[i] = s / self.lower[packed(i, i)];
        }
        x
    }

    /// Solves (L Lᵀ) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// L·Lᵀ.
    pub fn reconstruct(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                m.set(i, j, s);
            }
        }
        m
    }
}

// Pivots this small relative to the largest diagonal entry are treated as
// zero, so numerically singular matrices reach the ridge retry.
const PIVOT_RTOL: f64 = 1e-14;

fn factor(m: &SymMatrix, ridge: f64) -> Result<CholeskyFactor> {
    let n = m.dim;
    let scale = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max) + ridge;
    let mut l = vec![0.0; m.lower.len()];
    for j in 0..n {
        let mut d = m.get(j, j) + ridge;
        for k in 0..j {
            d -= l[packed(j, k)] * l[packed(j, k)];
        }
        if !(d > PIVOT_RTOL * scale) || !d.is_finite() {
            return Err(Error::SingularMatrix { pivot: j });
        }
        let djj = d.sqrt();
        l[packed(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[packed(i, k)] * l[packed(j, k)];
            }
            l[packed(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor {
        dim: n,
        lower: l,
        ridge,
    })
}

/// Cholesky factor of `m + ridge·I`.
///
/// When `ridge` is zero and factoring fails, one retry is made with
/// ridge `1e-9 · trace(m) / dim`; if that also fails the error carries the
/// failing pivot index.
pub fn cholesky(m: &SymMatrix, ridge: f64) -> Result<CholeskyFactor> {
    if !(ridge >= 0.0) {
        return Err(domain("ridge must be nonnegative"));
    }
    match factor(m, ridge) {
        Ok(f) => Ok(f),
        Err(e) if ridge == 0.0 => {
            let auto = default_ridge(m);
            if auto > 0.0 && auto.is_finite() {
                factor(m, auto)
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

/// The automatic retry ridge `1e-9 · trace(m) / dim`.
pub fn default_ridge(m: &SymMatrix) -> f64 {
    1e-9 * m.trace() / m.dim as f64
}

/// vᵀ (m + ridge·I)⁻¹ v through two triangular solves.
pub fn quad_form(m: &SymMatrix, v: &[f64], ridge: f64) -> Result<f64> {
    if v.len() != m.dim {
        return Err(domain(format!("vector length {} vs matrix dim {}", v.len(), m.dim)));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let f = cholesky(m, ridge)?;
    Ok(f.forward(v).iter().map(|y| y * y).sum())
}

/// (m + ridge·I)⁻¹ b.
pub fn solve(m: &SymMatrix, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if b.len() != m.dim {
        return Err(domain(format!("vector length {} vs matrix dim {}", b.len(), m.dim)));
    }
    Ok(cholesky(m, ridge)?.solve(b))
}

const CODY_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const CODY_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const CODY_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const CODY_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const CODY_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const CODY_Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_467_3e0,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_9e-3,
];
const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

// erf on |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let ysq = if x.abs() > 1.11e-16 { x * x } else { 0.0 };
    let mut num = CODY_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + CODY_A[i]) * ysq;
        den = (den + CODY_B[i]) * ysq;
    }
    x * (num + CODY_A[3]) / (den + CODY_B[3])
}

// erfc on y > 0.46875.
fn erfc_large(y: f64) -> f64 {
    let r = if y <= 4.0 {
        let mut num = CODY_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + CODY_C[i]) * y;
            den = (den + CODY_D[i]) * y;
        }
        (num + CODY_C[7]) / (den + CODY_D[7])
    } else {
        if y >= 26.6 {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = CODY_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + CODY_P[i]) * z;
            den = (den + CODY_Q[i]) * z;
        }
        let r = z * (num + CODY_P[4]) / (den + CODY_Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    };
    // split exp(-y²) to keep the low bits of y²
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.468_75 {
        erf_small(x)
    } else {
        let r = 1.0 - erfc_large(y);
        if x < 0.0 {
            -r
        } else {
            r
        }
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.468_75 {
        1.0 - erf_small(x)
    } else {
        let r = erfc_large(y);
        if x < 0.0 {
            2.0 - r
        } else {
            r
        }
    }
}

/// Φ(x) without input validation; ±∞ map to 1 and 0.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal CDF Φ(x), absolute error below 1e-12.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("normal_cdf of non-finite {x}")));
    }
    Ok(phi(x))
}

/// Correctly rounded sum of finite values (Shewchuk's partials, as in
/// Python's `math.fsum`). The result does not depend on input order.
pub fn exact_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in xs {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // half-way case: the remaining partials decide the rounding direction
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    0.398_942_280_401_432_7 * (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_cases() {
        assert_eq!(exact_sum([]), 0.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100, 1e-100]), 1.0);
        assert_eq!(exact_sum([1.0, 1e-16, 1e-16]), 1.0000000000000002);
        assert_eq!(exact_sum([2f64.powi(53), 1.0, -0.5]), 2f64.powi(53));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        assert!(normal_cdf(10.0).unwrap() >= 1.0 - 1e-12);
        assert!((normal_cdf(1.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cholesky_examples() {
        let f = cholesky(&SymMatrix::identity(2), 0.0).unwrap();
        assert_eq!(f.reconstruct(), SymMatrix::identity(2));
        assert_eq!(f.get(1, 0), 0.0);

        let f = cholesky(&SymMatrix::diagonal(&[4.0, 9.0]), 0.0).unwrap();
        assert_eq!((f.get(0, 0), f.get(1, 1)), (2.0, 3.0));

        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = cholesky(&m, 0.0).unwrap();
        assert!((f.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((f.get(1, 0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((f.get(1, 1) - 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn singular_reports_pivot() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(cholesky(&m, 0.0), Err(Error::SingularMatrix { pivot: 1 }));
        assert_eq!(
            cholesky(&SymMatrix::zeros(3), 0.0),
            Err(Error::SingularMatrix { pivot: 0 })
        );
    }

    #[test]
    fn rank_deficient_retries_with_ridge() {
        let m = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = cholesky(&m, 0.0).unwrap();
        assert!((f.ridge() - 1e-9).abs() < 1e-24);
        // v in the range of m: the ridge barely moves the quadratic form
        let q = quad_form(&m, &[1.0, 1.0], 0.0).unwrap();
        assert!((q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quad_form_examples() {
        let i2 = SymMatrix::identity(2);
        assert!((quad_form(&i2, &[3.0, 4.0], 0.0).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(quad_form(&i2, &[0.0, 0.0], 0.0).unwrap(), 0.0);
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((quad_form(&m, &[1.0, 1.0], 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(quad_form(&m, &[1.0], 0.0).is_err());
    }

    #[test]
    fn asymmetric_rows_rejected() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn submatrix_picks_entries() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 5.0], vec![3.0, 5.0, 6.0]]).unwrap();
        let s = m.submatrix(&[2, 0]);
        assert_eq!(s.to_rows(), vec![vec![6.0, 3.0], vec![3.0, 1.0]]);
    }
}
