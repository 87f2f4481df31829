//! Dense row-major matrices and the symmetric routines the rest of the crate
//! is built on: eigendecomposition, ridge-regularised inverse square roots,
//! (weighted) covariance and correlation diagnostics.
//!
//! Everything is `f64`. The eigensolver is nalgebra's symmetric QR; results
//! are re-sorted in descending order and eigenvector signs are pinned so that
//! repeated decompositions of the same input are bit-identical.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};

/// Row-major dense matrix: `data[i * cols + j]` holds entry `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = KwError;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(KwError::dims(
                "DenseMatrix::new",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(KwError::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(KwError::dims(
                "matmul",
                format!("{} rows on the right", self.cols),
                other.rows,
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b = other.row(k);
                for (oj, &bj) in o.iter_mut().zip(b) {
                    *oj += aik * bj;
                }
            }
        }
        Ok(out)
    }

    /// `self * selfᵀ`, computed on the upper triangle and mirrored so the
    /// result is exactly symmetric.
    pub fn gram_rows(&self) -> DenseMatrix {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// `selfᵀ * self`, exactly symmetric.
    pub fn gram_cols(&self) -> DenseMatrix {
        let d = self.cols;
        let mut upper = vec![0.0; d * d];
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let dst = &mut upper[i * d..(i + 1) * d];
                for j in i..d {
                    dst[j] += ri * row[j];
                }
            }
        }
        let mut out = Self::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = upper[i * d + j];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// First `n` rows.
    pub fn top_rows(&self, n: usize) -> DenseMatrix {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    pub fn vstack(&self, below: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != below.cols && self.rows > 0 && below.rows > 0 {
            return Err(KwError::dims("vstack", self.cols, below.cols));
        }
        let cols = if self.rows > 0 { self.cols } else { below.cols };
        let mut data = Vec::with_capacity((self.rows + below.rows) * cols);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&below.data);
        Ok(Self {
            rows: self.rows + below.rows,
            cols,
            data,
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(KwError::dims(
                "sub",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        if self.rows == 0 {
            return means;
        }
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · Vᵀ`, exactly symmetric.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let scaled: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let vi = v.row(i);
            for j in i..n {
                let vj = v.row(j);
                let mut acc = 0.0;
                for k in 0..n {
                    acc += vi[k] * scaled[k] * vj[k];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|l| l)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigendecomposition. The input is symmetrised as `(M + Mᵀ)/2`
/// first; each eigenvector is sign-normalised so its largest-magnitude entry
/// is positive.
pub fn sym_eig(m: &DenseMatrix) -> Result<EigenDecomposition> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(KwError::NotSquare { rows, cols });
    }
    if !m.is_finite() {
        return Err(KwError::NonFinite("sym_eig input"));
    }
    let n = rows;
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) || !vectors.is_finite() {
        return Err(KwError::NonFinite("sym_eig output"));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// `(M + ridge·I)^{-1/2}` for a PSD matrix, with shifted eigenvalues clamped
/// at `ridge` from below. Eigenvalues of `M` below `-ridge` are rejected.
pub fn inv_sqrt_psd(m: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    let eig = sym_eig(m)?;
    inv_sqrt_from_eig(&eig, ridge)
}

/// Same as [`inv_sqrt_psd`] but reusing an existing decomposition.
pub fn inv_sqrt_from_eig(eig: &EigenDecomposition, ridge: f64) -> Result<DenseMatrix> {
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(KwError::param("ridge", format!("must be positive, got {ridge}")));
    }
    let lo = eig.min_eigenvalue();
    if lo < -ridge {
        return Err(KwError::PsdViolation {
            eigenvalue: lo,
            ridge,
        });
    }
    Ok(eig.reconstruct_with(|l| 1.0 / (l + ridge).max(ridge).sqrt()))
}

/// Converts a ridge expressed relative to the largest eigenvalue into an
/// absolute one. A non-positive spectrum falls back to the relative value.
pub fn absolute_ridge(eig: &EigenDecomposition, relative: f64) -> f64 {
    let top = eig.max_eigenvalue();
    if top > 0.0 {
        relative * top
    } else {
        relative
    }
}

/// Sample covariance with the `n - 1` normaliser.
///
/// With `weights`, each row is scaled by its weight and every column is then
/// centred by the weighted column mean, `F_i = w ⊙ x_i − mean(w ⊙ x_i)`.
/// Weights are rescaled to mean one beforehand, so any constant weight vector
/// reproduces the unweighted covariance.
pub fn covariance(x: &DenseMatrix, weights: Option<&[f64]>) -> Result<DenseMatrix> {
    let centred = weighted_centred(x, weights)?;
    let n = x.rows() as f64;
    Ok(centred.gram_cols().scale(1.0 / (n - 1.0)))
}

fn weighted_centred(x: &DenseMatrix, weights: Option<&[f64]>) -> Result<DenseMatrix> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(KwError::InsufficientData {
            context: "covariance",
            needed: 2,
            got: n,
        });
    }
    let mut f = x.clone();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(KwError::dims("covariance weights", n, w.len()));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KwError::param("weights", "must be finite and nonnegative"));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(KwError::param("weights", "must not all be zero"));
        }
        let scale = n as f64 / total;
        for i in 0..n {
            let wi = w[i] * scale;
            f.row_mut(i).iter_mut().for_each(|v| *v *= wi);
        }
    }
    let means = f.column_means();
    for i in 0..n {
        for (v, m) in f.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    debug_assert_eq!(f.cols(), d);
    Ok(f)
}

/// Mean absolute off-diagonal correlation read off a covariance matrix.
/// Columns with zero variance are left out; fewer than two usable columns
/// makes the metric undefined.
pub fn off_diag_from_covariance(cov: &DenseMatrix) -> Result<f64> {
    let d = cov.rows();
    if d < 2 {
        return Err(KwError::UndefinedMetric(format!(
            "off-diagonal correlation needs at least 2 columns, got {d}"
        )));
    }
    let scale = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let live: Vec<usize> = (0..d)
        .filter(|&i| cov[(i, i)] > scale * 1e-24 && cov[(i, i)] > 0.0)
        .collect();
    if live.len() < 2 {
        return Err(KwError::UndefinedMetric(format!(
            "only {} column(s) with positive variance",
            live.len()
        )));
    }
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            let r = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
            acc += r.abs().min(1.0);
            pairs += 1;
        }
    }
    Ok(acc / pairs as f64)
}

/// Mean `|corr(col_i, col_j)|` over all column pairs `i < j`.
pub fn off_diag_correlation(x: &DenseMatrix) -> Result<f64> {
    if x.cols() < 2 {
        return Err(KwError::UndefinedMetric(format!(
            "off-diagonal correlation needs at least 2 columns, got {}",
            x.cols()
        )));
    }
    off_diag_from_covariance(&covariance(x, None)?)
}

/// [`off_diag_correlation`] computed from the weighted covariance.
pub fn weighted_off_diag_correlation(x: &DenseMatrix, weights: &[f64]) -> Result<f64> {
    if x.cols() < 2 {
        return Err(KwError::UndefinedMetric(format!(
            "off-diagonal correlation needs at least 2 columns, got {}",
            x.cols()
        )));
    }
    off_diag_from_covariance(&covariance(x, Some(weights))?)
}
