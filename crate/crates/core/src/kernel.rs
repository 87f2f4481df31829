//! RBF kernel evaluation, gram matrices and the median-distance bandwidth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::linalg::DenseMatrix;

/// Pair budget above which [`median_bandwidth`] subsamples.
pub const MEDIAN_PAIR_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl KernelConfig {
    pub fn rbf(sigma: f64) -> Result<Self> {
        let cfg = Self {
            kind: KernelKind::Rbf,
            sigma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let two_var = 2.0 * self.sigma * self.sigma;
        if !(self.sigma > 0.0 && two_var.is_normal()) {
            return Err(KwError::param(
                "sigma",
                format!("must be positive and finite, got {}", self.sigma),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => rbf_unchecked(x, y, self.sigma),
        }
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn rbf_unchecked(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (-squared_distance(x, y) / (2.0 * sigma * sigma)).exp()
}

/// `exp(−‖x−y‖² / (2σ²))`.
pub fn rbf(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(KwError::dims("rbf", x.len(), y.len()));
    }
    KernelConfig::rbf(sigma)?;
    Ok(rbf_unchecked(x, y, sigma))
}

/// Kernel matrix with entry `(i, j) = k(X_i, Y_j)`.
pub fn gram(x: &DenseMatrix, y: &DenseMatrix, cfg: &KernelConfig) -> Result<DenseMatrix> {
    if x.cols() != y.cols() {
        return Err(KwError::dims("gram feature dimension", x.cols(), y.cols()));
    }
    cfg.validate()?;
    Ok(DenseMatrix::from_fn(x.rows(), y.rows(), |i, j| {
        cfg.eval(x.row(i), y.row(j))
    }))
}

/// Symmetric gram of `X` with itself; fills one triangle and mirrors it.
pub fn gram_sym(x: &DenseMatrix, cfg: &KernelConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    let n = x.rows();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = cfg.eval(x.row(i), x.row(i));
        for j in i + 1..n {
            let v = cfg.eval(x.row(i), x.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Median pairwise Euclidean distance. All `i < j` pairs are used when there
/// are at most [`MEDIAN_PAIR_BUDGET`] of them; otherwise that many pairs are
/// drawn uniformly with the given seed.
pub fn median_bandwidth(x: &DenseMatrix, seed: u64) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(KwError::InsufficientData {
            context: "median_bandwidth",
            needed: 2,
            got: n,
        });
    }
    let total_pairs = n * (n - 1) / 2;
    let mut dists = Vec::with_capacity(total_pairs.min(MEDIAN_PAIR_BUDGET));
    if total_pairs <= MEDIAN_PAIR_BUDGET {
        for i in 0..n {
            for j in i + 1..n {
                dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while dists.len() < MEDIAN_PAIR_BUDGET {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j {
                dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
            }
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if !(median > 0.0) {
        return Err(KwError::DegenerateData(
            "median pairwise distance is zero".into(),
        ));
    }
    Ok(median)
}
