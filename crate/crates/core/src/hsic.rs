//! Sample reweighting that decorrelates features.
//!
//! For a feature matrix `F` (`L × D`) and sample weights `w`, every column is
//! weighted and re-centred, `F̃_i = w ⊙ F_i − mean(w ⊙ F_i)`, and the
//! objective is the squared Frobenius norm of the pairwise cross-covariances
//!
//! ```text
//! J(w) = Σ_{i<j} (F̃_iᵀ F̃_j)² / (L − 1)²
//! ```
//!
//! Because the columns of `F̃` sum to zero, `∂(F̃_iᵀF̃_j)/∂w_k =
//! F_ki F̃_kj + F_kj F̃_ki`, which gives the closed-form gradient
//! `∂J/∂w_k = 2/(L−1)² · Σ_i F_ki (F̃ C_off)_ki` with `C = F̃ᵀF̃` and
//! `C_off` its off-diagonal part. When `D > L` the products are formed
//! through the `L × L` matrix `F̃F̃ᵀ` instead of `C`.

use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::kernel::{gram_sym, KernelConfig};
use crate::linalg::DenseMatrix;

/// Nonnegative per-sample weights summing to the sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    values: Vec<f64>,
}

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
    }

    /// Validates nonnegativity and renormalises to sum `len`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(KwError::param("weights", "empty weight vector"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KwError::param("weights", "must be finite and nonnegative"));
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(KwError::param("weights", "must not all be zero"));
        }
        let scale = values.len() as f64 / total;
        Ok(Self {
            values: values.into_iter().map(|v| v * scale).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicOptConfig {
    pub max_iters: usize,
    /// `None` means `0.5 / L`.
    pub step_size: Option<f64>,
    /// Relative objective change below which the optimizer stops.
    pub tol: f64,
    /// Lower bound for every weight.
    pub floor: f64,
}

impl Default for HsicOptConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            step_size: None,
            tol: 1e-6,
            floor: 0.05,
        }
    }
}

impl HsicOptConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(KwError::param("hsic_step_size", format!("must be positive, got {s}")));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(KwError::param("hsic_tol", format!("must be positive, got {}", self.tol)));
        }
        if !(0.0..1.0).contains(&self.floor) {
            return Err(KwError::param("hsic_floor", format!("must be in [0, 1), got {}", self.floor)));
        }
        Ok(())
    }
}

/// Result of [`optimize_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: SampleWeights,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_inputs(f: &DenseMatrix, w: &[f64]) -> Result<()> {
    let (l, d) = f.shape();
    if l < 2 {
        return Err(KwError::InsufficientData {
            context: "weighted objective",
            needed: 2,
            got: l,
        });
    }
    if d == 0 {
        return Err(KwError::dims("weighted objective columns", "at least 1", 0));
    }
    if w.len() != l {
        return Err(KwError::dims("weighted objective weights", l, w.len()));
    }
    if !f.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(KwError::NonFinite("weighted objective input"));
    }
    Ok(())
}

fn weighted_centre(f: &DenseMatrix, w: &[f64]) -> DenseMatrix {
    let mut ft = f.clone();
    for (i, &wi) in w.iter().enumerate() {
        ft.row_mut(i).iter_mut().for_each(|v| *v *= wi);
    }
    let means = ft.column_means();
    for i in 0..ft.rows() {
        for (v, m) in ft.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    ft
}

/// Cross-covariance products of the centred matrix `ft`, along with
/// `ft · C_off` when requested.
struct CrossTerms {
    off_diag_sq: f64,
    ft_c_off: Option<DenseMatrix>,
}

fn cross_terms(ft: &DenseMatrix, with_product: bool) -> CrossTerms {
    let (l, d) = ft.shape();
    if d <= l {
        let mut c = ft.gram_cols();
        let mut off = 0.0;
        for i in 0..d {
            c[(i, i)] = 0.0;
            for j in i + 1..d {
                off += c[(i, j)] * c[(i, j)];
            }
        }
        let ft_c_off = with_product.then(|| ft.matmul(&c).expect("shapes agree"));
        CrossTerms {
            off_diag_sq: off,
            ft_c_off,
        }
    } else {
        let k = ft.gram_rows();
        let diag: Vec<f64> = {
            let mut s = vec![0.0; d];
            for r in 0..l {
                for (acc, v) in s.iter_mut().zip(ft.row(r)) {
                    *acc += v * v;
                }
            }
            s
        };
        let full: f64 = k.as_slice().iter().map(|v| v * v).sum();
        let diag_sq: f64 = diag.iter().map(|v| v * v).sum();
        let off = (0.5 * (full - diag_sq)).max(0.0);
        let ft_c_off = with_product.then(|| {
            let mut p = k.matmul(ft).expect("shapes agree");
            for r in 0..l {
                let src = ft.row(r).to_vec();
                for ((pv, fv), dv) in p.row_mut(r).iter_mut().zip(&src).zip(&diag) {
                    *pv -= fv * dv;
                }
            }
            p
        });
        CrossTerms {
            off_diag_sq: off,
            ft_c_off,
        }
    }
}

/// `Σ_{i<j} (F̃_iᵀF̃_j)² / (L−1)²`.
pub fn weighted_objective(f: &DenseMatrix, w: &[f64]) -> Result<f64> {
    check_inputs(f, w)?;
    let l = f.rows() as f64;
    let ft = weighted_centre(f, w);
    Ok(cross_terms(&ft, false).off_diag_sq / ((l - 1.0) * (l - 1.0)))
}

/// Exact gradient of [`weighted_objective`] with respect to `w`.
pub fn objective_gradient(f: &DenseMatrix, w: &[f64]) -> Result<Vec<f64>> {
    check_inputs(f, w)?;
    Ok(gradient_unchecked(f, w).1)
}

fn gradient_unchecked(f: &DenseMatrix, w: &[f64]) -> (f64, Vec<f64>) {
    let l = f.rows();
    let norm = 1.0 / ((l as f64 - 1.0) * (l as f64 - 1.0));
    let ft = weighted_centre(f, w);
    let terms = cross_terms(&ft, true);
    let prod = terms.ft_c_off.expect("requested");
    let grad = (0..l)
        .map(|k| 2.0 * norm * crate::linalg::dot(f.row(k), prod.row(k)))
        .collect();
    (terms.off_diag_sq * norm, grad)
}

/// Euclidean projection onto `{w : w_i ≥ floor, Σ w_i = n}`.
fn project_floored_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let n = v.len();
    let budget = n as f64 * (1.0 - floor);
    let mut u: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = u.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - budget) / (i as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        }
    }
    u.iter_mut().for_each(|x| *x = (*x - theta).max(0.0) + floor);
    u
}

/// Projected gradient descent on [`weighted_objective`] starting from
/// uniform weights. Each step is projected onto the floored simplex; steps
/// that would raise the objective are halved until they do not, so accepted
/// iterates never get worse. Running out of iterations is reported through
/// `converged = false`, not as an error.
pub fn optimize_weights(f: &DenseMatrix, cfg: &HsicOptConfig) -> Result<WeightSolution> {
    cfg.validate()?;
    let l = f.rows();
    let mut w = vec![1.0; l];
    check_inputs(f, &w)?;

    let mut objective = weighted_objective(f, &w)?;
    let initial_objective = objective;
    let mut converged = objective <= cfg.tol || f.cols() < 2;
    let mut iterations = 0;
    let mut step = cfg.step_size.unwrap_or(0.5 / l as f64);

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let (_, grad) = gradient_unchecked(f, &w);
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let candidate = project_floored_simplex(&trial, cfg.floor);
            let value = weighted_objective(f, &candidate)?;
            if value <= objective {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            // no descent direction left at this resolution
            converged = true;
            break;
        };
        let change = (objective - value) / objective.max(f64::MIN_POSITIVE);
        w = candidate;
        objective = value;
        step *= 2.0;
        if change < cfg.tol || objective <= f64::MIN_POSITIVE {
            converged = true;
        }
    }

    Ok(WeightSolution {
        weights: SampleWeights { values: w },
        objective,
        initial_objective,
        iterations,
        converged,
    })
}

/// Biased empirical HSIC, `trace(K H L H) / n²`, with RBF grams of `X` and
/// `Y` under the same kernel configuration.
pub fn hsic_statistic(x: &DenseMatrix, y: &DenseMatrix, cfg: &KernelConfig) -> Result<f64> {
    let n = x.rows();
    if y.rows() != n {
        return Err(KwError::dims("hsic_statistic rows", n, y.rows()));
    }
    if n < 4 {
        return Err(KwError::InsufficientData {
            context: "hsic_statistic",
            needed: 4,
            got: n,
        });
    }
    let k = gram_sym(x, cfg)?;
    let lg = gram_sym(y, cfg)?;
    Ok(centred_inner(&k, &lg) / (n as f64 * n as f64))
}

/// `trace(HKH · L)` with `H` the centring matrix.
fn centred_inner(k: &DenseMatrix, l: &DenseMatrix) -> f64 {
    let n = k.rows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            // K is symmetric, so column means equal row means
            let kc = k[(i, j)] - row_means[i] - row_means[j] + grand;
            acc += kc * l[(i, j)];
        }
    }
    acc.max(0.0)
}
