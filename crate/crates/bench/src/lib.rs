//! Fixtures shared by the criterion benches.

use kw_core::{BiasGenConfig, DatasetSplits, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `rows × cols` matrix of standard normal draws.
pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Symmetric positive definite `n × n` matrix.
pub fn spd(n: usize, seed: u64) -> DenseMatrix {
    let a = gaussian(n, n, seed);
    let mut m = a.transpose().matmul(&a).expect("square product");
    for i in 0..n {
        m[(i, i)] += n as f64;
    }
    m
}

/// The default benchmark at a reduced training size.
pub fn small_benchmark(n_train: usize) -> DatasetSplits {
    kw_core::data::generate_biased(&BiasGenConfig { n_train, n_test_id: 200, n_test_ood: 200, ..BiasGenConfig::default() })
        .expect("valid generator config")
}
