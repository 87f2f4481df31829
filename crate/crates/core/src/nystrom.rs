//! Nyström low-rank kernel features.
//!
//! A landmark subset `S` splits the full gram into blocks
//! `[G_s  G_rᵀ; G_r  G_x]`. The explicit feature map of a point `x` is
//! `φ(x) = k(x, S) · G_s^{-1/2}`, so that `φ(X)φ(X)ᵀ = C G_s⁻¹ Cᵀ` with
//! `C = k(X, S)`. [`batch_features`] applies the same construction to a
//! training batch stacked on top of the global feature bank, using the whole
//! stacked gram as the landmark block.
//!
//! Ridges passed to this module are relative to the largest eigenvalue of
//! the matrix being inverted; the resolved absolute value is what ends up in
//! [`NystromMap::ridge`].

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::kernel::{gram, gram_sym, KernelConfig};
use crate::linalg::{absolute_ridge, inv_sqrt_from_eig, sym_eig, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkStrategy {
    /// Seeded sampling without replacement.
    Uniform,
    /// Indices `0..s`.
    First,
}

/// Landmark/landmark and rest/landmark blocks of a gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    pub g_s: DenseMatrix,
    pub g_r: DenseMatrix,
    pub landmark_indices: Vec<usize>,
}

impl GramBlock {
    pub fn build(x: &DenseMatrix, landmark_indices: &[usize], cfg: &KernelConfig) -> Result<Self> {
        check_indices(x.rows(), landmark_indices)?;
        let mut is_landmark = vec![false; x.rows()];
        for &i in landmark_indices {
            if is_landmark[i] {
                return Err(KwError::param("landmark_indices", format!("index {i} repeated")));
            }
            is_landmark[i] = true;
        }
        let landmarks = x.select_rows(landmark_indices);
        let rest: Vec<usize> = (0..x.rows()).filter(|&i| !is_landmark[i]).collect();
        Ok(Self {
            g_s: gram_sym(&landmarks, cfg)?,
            g_r: gram(&x.select_rows(&rest), &landmarks, cfg)?,
            landmark_indices: landmark_indices.to_vec(),
        })
    }
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(KwError::param("landmark_indices", "at least one landmark is required"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(KwError::param(
            "landmark_indices",
            format!("index {bad} out of range for {n} rows"),
        ));
    }
    Ok(())
}

/// Picks `s` distinct row indices out of `x`. Uniform selections are sorted.
pub fn select_landmarks(
    x: &DenseMatrix,
    s: usize,
    strategy: LandmarkStrategy,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = x.rows();
    if s == 0 || s > n {
        return Err(KwError::InvalidCount {
            requested: s,
            available: n,
        });
    }
    Ok(match strategy {
        LandmarkStrategy::First => (0..s).collect(),
        LandmarkStrategy::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = index::sample(&mut rng, n, s).into_vec();
            picked.sort_unstable();
            picked
        }
    })
}

/// Fitted Nyström feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NystromMap {
    pub landmarks: DenseMatrix,
    pub kernel: KernelConfig,
    pub g_s_inv_sqrt: DenseMatrix,
    /// Absolute ridge added to `G_s` before the inverse square root.
    pub ridge: f64,
}

/// Fits the map on the landmark rows `indices` of `x`. Repeated indices are
/// allowed here; the ridge keeps the rank-deficient `G_s` invertible.
pub fn fit_map(
    x: &DenseMatrix,
    indices: &[usize],
    cfg: &KernelConfig,
    relative_ridge: f64,
) -> Result<NystromMap> {
    check_indices(x.rows(), indices)?;
    fit_on_landmarks(x.select_rows(indices), cfg, relative_ridge)
}

/// Fits the map directly on a landmark matrix.
pub fn fit_on_landmarks(
    landmarks: DenseMatrix,
    cfg: &KernelConfig,
    relative_ridge: f64,
) -> Result<NystromMap> {
    let g_s = gram_sym(&landmarks, cfg)?;
    let eig = sym_eig(&g_s)?;
    let ridge = absolute_ridge(&eig, relative_ridge);
    let g_s_inv_sqrt = inv_sqrt_from_eig(&eig, ridge)?;
    Ok(NystromMap {
        landmarks,
        kernel: *cfg,
        g_s_inv_sqrt,
        ridge,
    })
}

impl NystromMap {
    pub fn width(&self) -> usize {
        self.landmarks.rows()
    }

    /// `φ(X) = k(X, S) · G_s^{-1/2}`.
    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.landmarks.cols() {
            return Err(KwError::dims("nystrom transform", self.landmarks.cols(), x.cols()));
        }
        gram(x, &self.landmarks, &self.kernel)?.matmul(&self.g_s_inv_sqrt)
    }

    /// Low-rank gram estimate `φ(X)φ(X)ᵀ`.
    pub fn approx_gram(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.transform(x)?.gram_rows())
    }
}

pub fn transform(map: &NystromMap, x: &DenseMatrix) -> Result<DenseMatrix> {
    map.transform(x)
}

pub fn approx_gram(map: &NystromMap, x: &DenseMatrix) -> Result<DenseMatrix> {
    map.approx_gram(x)
}

/// Batch representation against the global bank: with `G` the gram of the
/// stacked rows `[Z_L; Z_f]`, returns the first `L` rows of
/// `G · (G + εI)^{-1/2}`, an `L × (L + m)` matrix.
pub fn batch_features(
    batch: &DenseMatrix,
    bank: &DenseMatrix,
    cfg: &KernelConfig,
    relative_ridge: f64,
) -> Result<DenseMatrix> {
    if batch.rows() == 0 {
        return Err(KwError::InsufficientData {
            context: "batch_features",
            needed: 1,
            got: 0,
        });
    }
    if bank.rows() > 0 && bank.cols() != batch.cols() {
        return Err(KwError::dims("batch_features bank width", batch.cols(), bank.cols()));
    }
    let stacked = batch.vstack(bank)?;
    let g = gram_sym(&stacked, cfg)?;
    let eig = sym_eig(&g)?;
    let ridge = absolute_ridge(&eig, relative_ridge);
    let inv_sqrt = inv_sqrt_from_eig(&eig, ridge)?;
    g.top_rows(batch.rows()).matmul(&inv_sqrt)
}
