//! Linear (PCA) whitening and isotropy diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::linalg::{absolute_ridge, covariance, off_diag_from_covariance, sym_eig, DenseMatrix};

/// Affine map `x ↦ (x − mean) · transform` sending the fit data to zero
/// mean and (approximately) identity covariance on `k` retained directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitener {
    pub mean: Vec<f64>,
    /// `d × k`: top-`k` covariance eigenvectors scaled by `(λ + ridge)^{-1/2}`.
    pub transform: DenseMatrix,
    /// Absolute ridge added to each retained eigenvalue.
    pub ridge: f64,
}

impl Whitener {
    pub fn input_dim(&self) -> usize {
        self.transform.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.transform.cols()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        apply_whitener(self, x)
    }
}

/// Fits a whitener keeping `out_dim` principal directions. `relative_ridge`
/// is scaled by the largest covariance eigenvalue.
pub fn fit_whitener(x: &DenseMatrix, out_dim: usize, relative_ridge: f64) -> Result<Whitener> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(KwError::InsufficientData {
            context: "fit_whitener",
            needed: 2,
            got: n,
        });
    }
    if out_dim == 0 || out_dim > d {
        return Err(KwError::param(
            "out_dim",
            format!("must be in 1..={d}, got {out_dim}"),
        ));
    }
    if !(relative_ridge > 0.0 && relative_ridge.is_finite()) {
        return Err(KwError::param("ridge", format!("must be positive, got {relative_ridge}")));
    }
    let cov = covariance(x, None)?;
    let eig = sym_eig(&cov)?;
    let ridge = absolute_ridge(&eig, relative_ridge);
    let transform = DenseMatrix::from_fn(d, out_dim, |i, j| {
        let lambda = eig.eigenvalues[j].max(0.0);
        eig.eigenvectors[(i, j)] / (lambda + ridge).sqrt()
    });
    Ok(Whitener {
        mean: x.column_means(),
        transform,
        ridge,
    })
}

/// Symmetric (ZCA) whitener: `transform = V · diag((λ + ridge)^{-1/2}) · Vᵀ`.
/// Output coordinates stay aligned with the input ones, so refits on
/// similar data give similar maps.
pub fn fit_zca_whitener(x: &DenseMatrix, relative_ridge: f64) -> Result<Whitener> {
    let d = x.cols();
    let pca = fit_whitener(x, d, relative_ridge)?;
    let eig = sym_eig(&covariance(x, None)?)?;
    let transform = pca.transform.matmul(&eig.eigenvectors.transpose())?;
    Ok(Whitener { transform, ..pca })
}

pub fn apply_whitener(w: &Whitener, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != w.mean.len() {
        return Err(KwError::dims("apply_whitener", w.mean.len(), x.cols()));
    }
    let mut centred = x.clone();
    for i in 0..centred.rows() {
        for (v, m) in centred.row_mut(i).iter_mut().zip(&w.mean) {
            *v -= m;
        }
    }
    centred.matmul(&w.transform)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    /// `None` when fewer than two columns have positive variance.
    pub off_diag_correlation: Option<f64>,
    /// `λ_max / λ_min` of the correlation matrix over non-degenerate
    /// columns; `f64::INFINITY` when that matrix is singular.
    pub eigenvalue_ratio: f64,
    pub mean_norm: f64,
    /// Columns with zero variance, excluded from the other statistics.
    pub degenerate_columns: Vec<usize>,
}

pub fn isotropy_report(x: &DenseMatrix) -> Result<IsotropyReport> {
    let cov = covariance(x, None)?;
    let d = cov.rows();
    let scale = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let (live, degenerate): (Vec<usize>, Vec<usize>) =
        (0..d).partition(|&i| cov[(i, i)] > 0.0 && cov[(i, i)] > scale * 1e-24);

    let corr = DenseMatrix::from_fn(live.len(), live.len(), |a, b| {
        let (i, j) = (live[a], live[b]);
        cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
    });
    let eigenvalue_ratio = if live.is_empty() {
        f64::INFINITY
    } else {
        let eig = sym_eig(&corr)?;
        let (hi, lo) = (eig.max_eigenvalue(), eig.min_eigenvalue());
        if lo <= hi * 1e-12 {
            f64::INFINITY
        } else {
            hi / lo
        }
    };
    let off_diag_correlation = if live.len() >= 2 {
        Some(off_diag_from_covariance(&cov)?)
    } else {
        None
    };
    let mean_norm = x.column_means().iter().map(|m| m * m).sum::<f64>().sqrt();
    Ok(IsotropyReport {
        off_diag_correlation,
        eigenvalue_ratio,
        mean_norm,
        degenerate_columns: degenerate,
    })
}
