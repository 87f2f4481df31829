//! Seed-driven invariant checks for the numeric modules. Each check draws
//! its own sizes and data from the seed and compares against reference
//! values computed with direct loops.
//!
//! Shared by the proptest suite and the acceptance gate.

#![allow(dead_code)]

use kw_core::hsic::{objective_gradient, weighted_objective};
use kw_core::kernel::{gram, gram_sym, rbf};
use kw_core::linalg::{covariance, inv_sqrt_psd, off_diag_correlation, sym_eig};
use kw_core::model::{accuracy, forward, train_full_batch, weighted_ce_loss};
use kw_core::nystrom::{batch_features, fit_map, select_landmarks, LandmarkStrategy};
use kw_core::whitening::fit_whitener;
use kw_core::{optimize_weights, DenseMatrix, HsicOptConfig, KernelConfig, LinearClassifier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = fn(u64) -> Result<(), String>;

/// `(module, property, check)`.
pub const ALL: &[(&str, &str, Check)] = &[
    ("linalg", "eigenvectors orthonormal up to 128x128", linalg_eigenvectors_orthonormal),
    ("linalg", "inverse square root squares to (M+eps I)^-1", linalg_inverse_square_root),
    ("linalg", "covariance symmetric PSD", linalg_covariance_symmetric_psd),
    ("linalg", "off-diagonal correlation affine invariant", linalg_off_diag_affine_invariant),
    ("kernel", "rbf exactly symmetric", kernel_rbf_symmetric),
    ("kernel", "rbf decreasing in distance", kernel_rbf_decreasing),
    ("kernel", "gram PSD up to 512 points", kernel_gram_psd),
    ("nystrom", "all landmarks reproduce the gram", nystrom_full_landmarks_exact),
    ("nystrom", "mean error non-increasing as s doubles", nystrom_error_shrinks),
    ("nystrom", "features deterministic", nystrom_deterministic),
    ("nystrom", "outputs finite", nystrom_finite),
    ("whitening", "full-rank fit whitens the fit data", whitening_identity_covariance),
    ("whitening", "apply is affine", whitening_affine),
    ("whitening", "fit bit-reproducible with pinned signs", whitening_reproducible),
    ("hsic", "objective nonnegative, zero for one column", hsic_objective_nonnegative),
    ("hsic", "gradient matches central differences", hsic_gradient_fd),
    ("hsic", "weights feasible and no worse than uniform", hsic_weights_feasible),
    ("model", "unit-weight loss is summed cross-entropy", model_unit_weight_loss),
    ("model", "argmax invariant to shared logit offset", model_argmax_shift),
    ("model", "separable data reaches 99% train accuracy", model_separable),
];

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

pub fn naive_covariance(x: &DenseMatrix) -> DenseMatrix {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    DenseMatrix::from_fn(d, d, |a, b| {
        (0..n).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum::<f64>() / (n as f64 - 1.0)
    })
}

/// Objective from its definition: weight rows, centre columns, sum squared
/// pairwise column inner products over `(L − 1)²`.
pub fn brute_objective(f: &DenseMatrix, w: &[f64]) -> f64 {
    let (l, d) = f.shape();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let wc: Vec<f64> = (0..l).map(|i| w[i] * f[(i, j)]).collect();
            let m = wc.iter().sum::<f64>() / l as f64;
            wc.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut total = 0.0;
    for a in 0..d {
        for b in a + 1..d {
            let ip: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
            total += ip * ip;
        }
    }
    total / ((l - 1) as f64).powi(2)
}

/// Largest relative central-difference error of the analytic gradient.
/// Coordinates far below the gradient's scale are measured against it.
pub fn gradient_fd_error(f: &DenseMatrix, w: &[f64], h: f64) -> f64 {
    let g = objective_gradient(f, w).unwrap();
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let mut up = w.to_vec();
        let mut down = w.to_vec();
        up[i] += h;
        down[i] -= h;
        let fd = (brute_objective(f, &up) - brute_objective(f, &down)) / (2.0 * h);
        let denom = g[i].abs().max(1e-8 * gmax).max(1e-300);
        worst = worst.max((fd - g[i]).abs() / denom);
    }
    worst
}

/// Random correlated `L × D` features and positive weights summing to `L`.
pub fn hsic_instance(seed: u64, l: usize, d: usize) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix = normal(d, d, &mut rng);
    let f = normal(l, d, &mut rng).matmul(&mix).unwrap();
    let raw: Vec<f64> = (0..l).map(|_| rng.gen_range(0.2..2.0)).collect();
    let total: f64 = raw.iter().sum();
    (f, raw.iter().map(|v| v * l as f64 / total).collect())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frob_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm()
}

fn min_eigenvalue(m: &DenseMatrix) -> f64 {
    sym_eig(m).unwrap().min_eigenvalue()
}

pub fn linalg_eigenvectors_orthonormal(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=128);
    let a = normal(n, n, &mut r);
    let m = DenseMatrix::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)]);
    let eig = sym_eig(&m).map_err(|e| e.to_string())?;
    let v = &eig.eigenvectors;
    let err = naive_matmul(&v.transpose(), v).sub(&DenseMatrix::identity(n)).unwrap().max_abs();
    ensure!(err < 1e-8, "n={n}: |VtV - I| = {err:e}");
    ensure!(eig.eigenvalues.windows(2).all(|p| p[0] >= p[1]), "eigenvalues not descending");
    Ok(())
}

pub fn linalg_inverse_square_root(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=40);
    let eps = 10f64.powi(r.gen_range(-8..=0));
    let a = normal(n, n + 2, &mut r);
    let mut m = a.gram_rows();
    for i in 0..n {
        m[(i, i)] += 0.1;
    }
    let root = inv_sqrt_psd(&m, eps).map_err(|e| e.to_string())?;
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += eps;
    }
    let prod = naive_matmul(&naive_matmul(&root, &root), &shifted);
    let err = frob_diff(&prod, &DenseMatrix::identity(n)) / (n as f64).sqrt();
    ensure!(err < 1e-6, "n={n} eps={eps:e}: error {err:e}");
    Ok(())
}

pub fn linalg_covariance_symmetric_psd(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, d) = (r.gen_range(2..60), r.gen_range(1..20));
    let x = normal(n, d, &mut r).scale(10f64.powi(r.gen_range(-3..=3)));
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..2.0)).collect();
    for (label, c) in [("plain", covariance(&x, None)), ("weighted", covariance(&x, Some(&w)))] {
        let c = c.map_err(|e| e.to_string())?;
        let s = c.max_abs().max(f64::MIN_POSITIVE);
        ensure!(c.sub(&c.transpose()).unwrap().max_abs() <= 1e-10 * s, "{label}: asymmetric");
        let lo = min_eigenvalue(&c);
        ensure!(lo >= -1e-10 * s, "{label}: eigenvalue {lo:e}");
    }
    let c = covariance(&x, None).unwrap();
    let err = c.sub(&naive_covariance(&x)).unwrap().max_abs();
    ensure!(err <= 1e-10 * c.max_abs().max(f64::MIN_POSITIVE), "differs from direct sum by {err:e}");
    Ok(())
}

pub fn linalg_off_diag_affine_invariant(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, d) = (r.gen_range(5..80), r.gen_range(2..10));
    let mix = normal(d, d, &mut r);
    let x = normal(n, d, &mut r).matmul(&mix).unwrap();
    let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(r.gen_range(-3.0..3.0))).collect();
    let shifts: Vec<f64> = (0..d).map(|_| r.gen_range(-100.0..100.0)).collect();
    let y = DenseMatrix::from_fn(n, d, |i, j| scales[j] * x[(i, j)] + shifts[j]);
    let (a, b) = (off_diag_correlation(&x).unwrap(), off_diag_correlation(&y).unwrap());
    ensure!((a - b).abs() < 1e-9, "{a} vs {b}");
    Ok(())
}

pub fn kernel_rbf_symmetric(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.gen_range(1..30);
    let sigma = r.gen_range(0.01..100.0);
    for _ in 0..50 {
        let x: Vec<f64> = (0..d).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..d).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let (a, b) = (rbf(&x, &y, sigma).unwrap(), rbf(&y, &x, sigma).unwrap());
        ensure!(a.to_bits() == b.to_bits(), "{a} vs {b}");
    }
    Ok(())
}

pub fn kernel_rbf_decreasing(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.gen_range(1..10);
    let sigma = r.gen_range(0.1..10.0);
    let x: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
    let u: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
    let mut radii: Vec<f64> = (0..50).map(|_| r.gen_range(0.0..5.0 * sigma)).collect();
    radii.sort_by(f64::total_cmp);
    let values: Vec<f64> = radii
        .iter()
        .map(|t| {
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + t * b).collect();
            rbf(&x, &y, sigma).unwrap()
        })
        .collect();
    ensure!(values.windows(2).all(|p| p[0] >= p[1]), "not monotone");
    ensure!(values.iter().all(|v| (0.0..=1.0).contains(v)), "outside [0, 1]");
    Ok(())
}

pub fn kernel_gram_psd(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, d) = (r.gen_range(1..=512), r.gen_range(1..8));
    let x = normal(n, d, &mut r);
    let cfg = KernelConfig::rbf(r.gen_range(0.2..5.0)).unwrap();
    let g = gram_sym(&x, &cfg).unwrap();
    let lo = min_eigenvalue(&g);
    ensure!(lo >= -1e-10 * n as f64, "n={n}: eigenvalue {lo:e}");
    ensure!(g == gram(&x, &x, &cfg).unwrap(), "gram_sym differs from gram");
    Ok(())
}

/// Relative Frobenius error of the Nyström gram with `s` uniform landmarks.
pub fn nystrom_relative_error(x: &DenseMatrix, s: usize, seed: u64, cfg: &KernelConfig) -> f64 {
    let idx = select_landmarks(x, s, LandmarkStrategy::Uniform, seed).unwrap();
    let map = fit_map(x, &idx, cfg, 1e-10).unwrap();
    let exact = DenseMatrix::from_fn(x.rows(), x.rows(), |i, j| rbf(x.row(i), x.row(j), cfg.sigma).unwrap());
    frob_diff(&map.approx_gram(x).unwrap(), &exact) / exact.frobenius_norm()
}

pub fn nystrom_full_landmarks_exact(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, d) = (r.gen_range(2..80), r.gen_range(1..6));
    let x = normal(n, d, &mut r);
    let err = nystrom_relative_error(&x, n, seed, &KernelConfig::rbf(1.5).unwrap());
    ensure!(err < 1e-6, "n={n}: error {err:e}");
    Ok(())
}

pub fn nystrom_error_shrinks(seed: u64) -> Result<(), String> {
    let x = normal(128, 4, &mut rng(seed));
    let cfg = KernelConfig::rbf(1.5).unwrap();
    let mut last = f64::INFINITY;
    for s in [8, 16, 32, 64, 128] {
        let mean = (0..5).map(|k| nystrom_relative_error(&x, s, seed.wrapping_add(k), &cfg)).sum::<f64>() / 5.0;
        ensure!(mean <= last, "s={s}: {mean:e} > {last:e}");
        last = mean;
    }
    Ok(())
}

pub fn nystrom_deterministic(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (l, m) = (r.gen_range(2..20), r.gen_range(0..20));
    let batch = normal(l, 5, &mut r);
    let bank = normal(m, 5, &mut r);
    let cfg = KernelConfig::rbf(2.0).unwrap();
    let a = batch_features(&batch, &bank, &cfg, 1e-6).unwrap();
    ensure!(a == batch_features(&batch, &bank, &cfg, 1e-6).unwrap(), "batch_features differs");
    ensure!(a.shape() == (l, l + m), "shape {:?}", a.shape());
    let map = fit_map(&bank.vstack(&batch).unwrap(), &[0, 1], &cfg, 1e-6).unwrap();
    ensure!(map.transform(&batch).unwrap() == map.transform(&batch).unwrap(), "transform differs");
    Ok(())
}

pub fn nystrom_finite(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (l, m) = (r.gen_range(1..16), r.gen_range(0..16));
    let scale = 10f64.powi(r.gen_range(-6..=6));
    let mut batch = normal(l, 3, &mut r).scale(scale);
    if l > 1 {
        // duplicated rows make the gram singular
        let first = batch.row(0).to_vec();
        batch.row_mut(l - 1).copy_from_slice(&first);
    }
    let bank = normal(m, 3, &mut r).scale(scale);
    let cfg = KernelConfig::rbf(r.gen_range(0.01..10.0)).unwrap();
    ensure!(batch_features(&batch, &bank, &cfg, 1e-6).unwrap().is_finite(), "batch_features");
    let idx: Vec<usize> = (0..l).chain([0, 0]).collect();
    let map = fit_map(&batch, &idx, &cfg, 1e-6).unwrap();
    ensure!(map.transform(&bank.vstack(&batch).unwrap()).unwrap().is_finite(), "transform");
    Ok(())
}

/// Mixed, shifted Gaussian data.
pub fn correlated(n: usize, d: usize, r: &mut ChaCha8Rng) -> DenseMatrix {
    let mix = DenseMatrix::from_fn(d, d, |i, j| if i == j { 3.0 } else { r.gen_range(-1.0..1.0) });
    let mut x = normal(n, d, r).matmul(&mix).unwrap();
    for i in 0..n {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v += j as f64;
        }
    }
    x
}

pub fn whitening_identity_covariance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.gen_range(1..12);
    let x = correlated(20 * d + 10, d, &mut r);
    let w = fit_whitener(&x, d, 1e-12).unwrap();
    let c = naive_covariance(&w.apply(&x).unwrap());
    let err = frob_diff(&c, &DenseMatrix::identity(d)) / (d as f64).sqrt();
    ensure!(err < 1e-5, "d={d}: error {err:e}");
    Ok(())
}

pub fn whitening_affine(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.gen_range(1..8);
    let k = r.gen_range(1..=d);
    let alpha = r.gen_range(-2.0..3.0);
    let w = fit_whitener(&correlated(50, d, &mut r), k, 1e-9).unwrap();
    let (x1, x2) = (normal(7, d, &mut r), normal(7, d, &mut r));
    let mix = DenseMatrix::from_fn(7, d, |i, j| alpha * x1[(i, j)] + (1.0 - alpha) * x2[(i, j)]);
    let (y1, y2) = (w.apply(&x1).unwrap(), w.apply(&x2).unwrap());
    let expected = DenseMatrix::from_fn(7, k, |i, j| alpha * y1[(i, j)] + (1.0 - alpha) * y2[(i, j)]);
    let err = w.apply(&mix).unwrap().sub(&expected).unwrap().max_abs();
    ensure!(err <= 1e-12 * (1.0 + expected.max_abs()), "error {err:e}");
    Ok(())
}

pub fn whitening_reproducible(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let d = r.gen_range(2..10);
    let x = correlated(40, d, &mut r);
    let a = fit_whitener(&x, d, 1e-9).unwrap();
    ensure!(a == fit_whitener(&x.clone(), d, 1e-9).unwrap(), "refit differs");
    for j in 0..d {
        let col = a.transform.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        ensure!(pivot > 0.0, "column {j} has a negative pivot");
    }
    Ok(())
}

pub fn hsic_objective_nonnegative(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (l, d) = (r.gen_range(2..=16), r.gen_range(1..=8));
    let (f, w) = hsic_instance(seed, l, d);
    let obj = weighted_objective(&f, &w).unwrap();
    ensure!(obj >= 0.0, "negative objective {obj}");
    let reference = brute_objective(&f, &w);
    ensure!((obj - reference).abs() <= 1e-10 * reference.max(1e-300), "{obj} vs {reference}");
    let first = DenseMatrix::from_fn(l, 1, |i, _| f[(i, 0)]);
    let single = weighted_objective(&first, &w).unwrap();
    ensure!(single == 0.0, "one column gives {single}");
    Ok(())
}

pub fn hsic_gradient_fd(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (l, d) = (r.gen_range(2..=16), r.gen_range(1..=8));
    let (f, w) = hsic_instance(seed, l, d);
    let err = gradient_fd_error(&f, &w, 1e-5);
    ensure!(err < 1e-4, "L={l} D={d}: relative error {err:e}");
    Ok(())
}

pub fn hsic_weights_feasible(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (l, d) = (r.gen_range(2..=32), r.gen_range(1..=10));
    let floor = r.gen_range(0.0..0.5);
    let (f, _) = hsic_instance(seed, l, d);
    let sol = optimize_weights(&f, &HsicOptConfig { floor, ..HsicOptConfig::default() }).unwrap();
    let w = sol.weights.as_slice();
    ensure!(w.len() == l, "length {}", w.len());
    let sum: f64 = w.iter().sum();
    ensure!((sum - l as f64).abs() <= 1e-9, "sum {sum}");
    ensure!(w.iter().all(|&v| v >= floor - 1e-12), "weight below floor {floor}");
    let uniform = weighted_objective(&f, &vec![1.0; l]).unwrap();
    ensure!(sol.objective <= uniform, "{} > uniform {uniform}", sol.objective);
    Ok(())
}

fn random_classifier(k: usize, c: usize, r: &mut ChaCha8Rng) -> LinearClassifier {
    let mut clf = LinearClassifier::zeros(k, c).unwrap();
    clf.weights = normal(k, c, r);
    clf.bias = (0..c).map(|_| r.sample(StandardNormal)).collect();
    clf
}

pub fn model_unit_weight_loss(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (n, k, c) = (r.gen_range(1..40), r.gen_range(1..8), r.gen_range(2..6));
    let clf = random_classifier(k, c, &mut r);
    let x = normal(n, k, &mut r);
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
    let loss = weighted_ce_loss(&forward(&clf, &x).unwrap(), &labels, &vec![1.0; n]).unwrap();
    let reference: f64 = (0..n)
        .map(|i| {
            let z: Vec<f64> = (0..c)
                .map(|j| clf.bias[j] + (0..k).map(|t| x[(i, t)] * clf.weights[(t, j)]).sum::<f64>())
                .collect();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[labels[i]]
        })
        .sum();
    ensure!((loss - reference).abs() <= 1e-12 * (1.0 + reference.abs()), "{loss} vs {reference}");
    Ok(())
}

pub fn model_argmax_shift(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let clf = random_classifier(5, 4, &mut r);
    let shift = r.gen_range(-50.0..50.0);
    let mut shifted = clf.clone();
    shifted.bias.iter_mut().for_each(|b| *b += shift);
    let x = normal(60, 5, &mut r);
    ensure!(clf.predict(&x).unwrap() == shifted.predict(&x).unwrap(), "shift {shift} changed predictions");
    Ok(())
}

pub fn model_separable(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let dir: Vec<f64> = (0..4).map(|_| r.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    while rows.len() < 500 {
        let p: Vec<f64> = (0..4).map(|_| r.sample(StandardNormal)).collect();
        let margin = p.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / norm;
        if margin.abs() < 0.3 {
            continue;
        }
        labels.push(usize::from(margin > 0.0));
        rows.push(p);
    }
    let x = DenseMatrix::from_rows(&rows);
    let clf = train_full_batch(&x, &labels, 2, 200, 0.1).unwrap();
    let acc = accuracy(&clf.predict(&x).unwrap(), &labels).unwrap();
    ensure!(acc >= 0.99, "train accuracy {acc}");
    Ok(())
}
