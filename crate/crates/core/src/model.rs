//! Softmax linear classifier trained with sample-weighted cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::linalg::DenseMatrix;

/// Probabilities are clamped to this floor inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `k × C`.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let w = self.weights.frobenius_norm();
        (w * w + self.bias.iter().map(|b| b * b).sum::<f64>()).sqrt()
    }
}

impl LinearClassifier {
    pub fn zeros(inputs: usize, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(KwError::param("classes", format!("need at least 2, got {classes}")));
        }
        Ok(Self {
            weights: DenseMatrix::zeros(inputs, classes),
            bias: vec![0.0; classes],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, phi: &DenseMatrix) -> Result<DenseMatrix> {
        forward(self, phi)
    }

    pub fn predict(&self, phi: &DenseMatrix) -> Result<Vec<usize>> {
        let probs = forward(self, phi)?;
        Ok((0..probs.rows()).map(|i| argmax(probs.row(i))).collect())
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Row-wise softmax of `Φ·weights + bias`.
pub fn forward(clf: &LinearClassifier, phi: &DenseMatrix) -> Result<DenseMatrix> {
    if phi.cols() != clf.input_dim() {
        return Err(KwError::dims("forward input width", clf.input_dim(), phi.cols()));
    }
    let mut logits = phi.matmul(&clf.weights)?;
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        for (v, b) in row.iter_mut().zip(&clf.bias) {
            *v += b;
        }
        softmax_in_place(row);
    }
    Ok(logits)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn check_targets(n: usize, classes: usize, labels: &[usize], w: &[f64]) -> Result<()> {
    if labels.len() != n {
        return Err(KwError::dims("labels", n, labels.len()));
    }
    if w.len() != n {
        return Err(KwError::dims("sample weights", n, w.len()));
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return Err(KwError::LabelOutOfRange {
            row,
            label,
            classes,
        });
    }
    Ok(())
}

/// `Σ_i w_i · (−ln max(P[i, y_i], 1e-12))`.
pub fn weighted_ce_loss(probs: &DenseMatrix, labels: &[usize], w: &[f64]) -> Result<f64> {
    check_targets(probs.rows(), probs.cols(), labels, w)?;
    Ok(labels
        .iter()
        .zip(w)
        .enumerate()
        .map(|(i, (&y, &wi))| -wi * probs[(i, y)].max(PROB_FLOOR).ln())
        .sum())
}

/// Gradient of `weighted_ce_loss ∘ forward` in the classifier parameters.
pub fn loss_gradient(
    clf: &LinearClassifier,
    phi: &DenseMatrix,
    labels: &[usize],
    w: &[f64],
) -> Result<Gradients> {
    loss_and_gradient(clf, phi, labels, w).map(|(_, g)| g)
}

/// Forward pass, loss and gradient in one go.
pub fn loss_and_gradient(
    clf: &LinearClassifier,
    phi: &DenseMatrix,
    labels: &[usize],
    w: &[f64],
) -> Result<(f64, Gradients)> {
    let probs = forward(clf, phi)?;
    let loss = weighted_ce_loss(&probs, labels, w)?;
    let mut delta = probs;
    let mut bias = vec![0.0; clf.classes()];
    for (i, (&y, &wi)) in labels.iter().zip(w).enumerate() {
        let row = delta.row_mut(i);
        row[y] -= 1.0;
        for (b, v) in bias.iter_mut().zip(row.iter_mut()) {
            *v *= wi;
            *b += *v;
        }
    }
    let grads = Gradients {
        weights: phi.transpose().matmul(&delta)?,
        bias,
    };
    Ok((loss, grads))
}

pub fn sgd_step(clf: &mut LinearClassifier, grads: &Gradients, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(KwError::param("lr", format!("must be nonnegative, got {lr}")));
    }
    if grads.weights.shape() != clf.weights.shape() || grads.bias.len() != clf.bias.len() {
        return Err(KwError::dims(
            "sgd_step gradient shape",
            format!("{:?}", clf.weights.shape()),
            format!("{:?}", grads.weights.shape()),
        ));
    }
    let params = clf.weights.as_mut_slice();
    for (p, g) in params.iter_mut().zip(grads.weights.as_slice()) {
        *p -= lr * g;
    }
    for (p, g) in clf.bias.iter_mut().zip(&grads.bias) {
        *p -= lr * g;
    }
    Ok(())
}

/// Full-batch gradient descent from zero parameters with unit weights; the
/// step is `lr` times the mean per-sample gradient.
pub fn train_full_batch(
    x: &DenseMatrix,
    labels: &[usize],
    classes: usize,
    epochs: usize,
    lr: f64,
) -> Result<LinearClassifier> {
    if labels.is_empty() {
        return Err(KwError::EmptySplit);
    }
    let mut clf = LinearClassifier::zeros(x.cols(), classes)?;
    let unit = vec![1.0; labels.len()];
    let step = lr / labels.len() as f64;
    for _ in 0..epochs {
        let g = loss_gradient(&clf, x, labels, &unit)?;
        sgd_step(&mut clf, &g, step)?;
    }
    Ok(clf)
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(KwError::EmptySplit);
    }
    if predicted.len() != labels.len() {
        return Err(KwError::dims("accuracy", labels.len(), predicted.len()));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}
