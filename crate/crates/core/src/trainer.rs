//! Training loop: batching, the global feature bank, method dispatch,
//! evaluation and per-step timing.

use std::fmt;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplits, LabeledSplit};
use crate::error::{KwError, Result};
use crate::hsic::{optimize_weights, HsicOptConfig};
use crate::kernel::{median_bandwidth, KernelConfig};
use crate::linalg::{weighted_off_diag_correlation, DenseMatrix};
use crate::model::{accuracy, loss_and_gradient, sgd_step, LinearClassifier};
use crate::nystrom::{batch_features, fit_on_landmarks, NystromMap};
use crate::whitening::{fit_whitener, fit_zca_whitener, Whitener};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    LinearWhiten,
    KernelWhiten,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Plain, Method::LinearWhiten, Method::KernelWhiten];

    pub fn name(self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::LinearWhiten => "linear_whiten",
            Method::KernelWhiten => "kernel_whiten",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = KwError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| KwError::param("method", format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKernel {
    Auto,
}

/// Either a fixed kernel or `"auto"`, which picks the RBF bandwidth by the
/// median heuristic on the first batch together with the initial bank and
/// then keeps it for the rest of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSetting {
    Auto(AutoKernel),
    Fixed(KernelConfig),
}

impl Default for KernelSetting {
    fn default() -> Self {
        KernelSetting::Auto(AutoKernel::Auto)
    }
}

/// Where the linear map applied after the kernel features is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhitenScope {
    /// Refit on each batch's own features.
    Batch,
    /// Fit on the previous epoch's accumulated features (a warm-up pass with
    /// the initial bank for the first epoch); symmetric form.
    Epoch,
    /// No linear map after the kernel features.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub batch_size: usize,
    /// Kernel feature width `L + m`; output width of the linear whitener.
    pub latent_dim: usize,
    pub epochs: usize,
    /// Step size applied to the per-sample mean gradient.
    pub lr: f64,
    pub seed: u64,
    /// Relative ridge for kernel and covariance inverse square roots.
    pub ridge: f64,
    pub hsic: HsicOptConfig,
    pub alpha_max: f64,
    pub kernel: KernelSetting,
    pub whiten_scope: WhitenScope,
    /// Trajectory sampling period in steps.
    pub trajectory_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::KernelWhiten,
            batch_size: 32,
            latent_dim: 64,
            epochs: 10,
            lr: 0.1,
            seed: 0,
            ridge: 1e-6,
            hsic: HsicOptConfig::default(),
            alpha_max: 0.9,
            kernel: KernelSetting::default(),
            whiten_scope: WhitenScope::Epoch,
            trajectory_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(KwError::param("batch_size", format!("must be at least 2, got {}", self.batch_size)));
        }
        if self.latent_dim == 0 {
            return Err(KwError::param("latent_dim", "must be positive"));
        }
        if self.method == Method::KernelWhiten && self.latent_dim <= self.batch_size {
            return Err(KwError::param(
                "latent_dim",
                format!(
                    "kernel_whiten needs latent_dim > batch_size ({}), got {}",
                    self.batch_size, self.latent_dim
                ),
            ));
        }
        if self.epochs == 0 {
            return Err(KwError::param("epochs", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(KwError::param("lr", format!("must be positive, got {}", self.lr)));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(KwError::param("ridge", format!("must be positive, got {}", self.ridge)));
        }
        if !(0.0..=1.0).contains(&self.alpha_max) {
            return Err(KwError::param("alpha_max", format!("must be in [0, 1], got {}", self.alpha_max)));
        }
        if self.trajectory_every == 0 {
            return Err(KwError::param("trajectory_every", "must be positive"));
        }
        if let KernelSetting::Fixed(k) = &self.kernel {
            k.validate()?;
        }
        self.hsic.validate()
    }

    pub fn bank_size(&self) -> usize {
        self.latent_dim.saturating_sub(self.batch_size)
    }
}

/// The global features `Z_f`, updated by an exponential moving average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeatureBank {
    pub rows: DenseMatrix,
    pub step: u64,
    pub alpha_max: f64,
}

impl GlobalFeatureBank {
    /// `α_t = min(1 − 1/(t+2), alpha_max)`.
    pub fn alpha(&self) -> f64 {
        (1.0 - 1.0 / (self.step as f64 + 2.0)).min(self.alpha_max)
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }
}

/// `m` distinct training rows drawn with the given seed, in draw order.
pub fn init_bank(train: &DenseMatrix, m: usize, seed: u64, alpha_max: f64) -> Result<GlobalFeatureBank> {
    if m == 0 || m > train.rows() {
        return Err(KwError::InvalidCount {
            requested: m,
            available: train.rows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, train.rows(), m).into_vec();
    Ok(GlobalFeatureBank {
        rows: train.select_rows(&picked),
        step: 0,
        alpha_max,
    })
}

/// EMA update with the schedule `α_t`; see [`update_bank_with_alpha`].
pub fn update_bank<R: Rng>(bank: &mut GlobalFeatureBank, batch: &DenseMatrix, rng: &mut R) -> Result<()> {
    let alpha = bank.alpha();
    update_bank_with_alpha(bank, batch, alpha, rng)
}

/// `Z_f ← α Z_f + (1 − α) Z_L`. When the batch has at least `m` rows, bank
/// row `r` is paired with batch row `perm[r]` of a random permutation; with
/// fewer rows, a random size-`L` subset of the bank is updated.
pub fn update_bank_with_alpha<R: Rng>(
    bank: &mut GlobalFeatureBank,
    batch: &DenseMatrix,
    alpha: f64,
    rng: &mut R,
) -> Result<()> {
    if batch.cols() != bank.rows.cols() {
        return Err(KwError::dims("update_bank width", bank.rows.cols(), batch.cols()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(KwError::param("alpha", format!("must be in [0, 1], got {alpha}")));
    }
    let (m, l) = (bank.rows.rows(), batch.rows());
    let pairs: Vec<(usize, usize)> = if l >= m {
        let mut perm: Vec<usize> = (0..l).collect();
        perm.shuffle(rng);
        (0..m).map(|r| (r, perm[r])).collect()
    } else {
        let subset = index::sample(rng, m, l).into_vec();
        subset.into_iter().zip(0..l).collect()
    };
    for (r, b) in pairs {
        let src = batch.row(b);
        for (v, z) in bank.rows.row_mut(r).iter_mut().zip(src) {
            *v = alpha * *v + (1.0 - alpha) * z;
        }
    }
    bank.step += 1;
    Ok(())
}

/// Feature transform fixed at the end of training and used for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformState {
    Plain,
    Linear { whitener: Whitener },
    Kernel { map: NystromMap, whitener: Option<Whitener> },
}

impl TransformState {
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            TransformState::Plain => Ok(x.clone()),
            TransformState::Linear { whitener } => whitener.apply(x),
            TransformState::Kernel { map, whitener } => {
                let phi = map.transform(x)?;
                match whitener {
                    Some(w) => w.apply(&phi),
                    None => Ok(phi),
                }
            }
        }
    }
}

/// Fraction of rows whose argmax prediction equals the label. Rows are
/// transformed independently, so the result does not depend on row order.
pub fn evaluate(clf: &LinearClassifier, state: &TransformState, split: &LabeledSplit) -> Result<f64> {
    if split.is_empty() {
        return Err(KwError::EmptySplit);
    }
    let features = state.apply(&split.features)?;
    accuracy(&clf.predict(&features)?, &split.labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// First step of the window.
    pub step: usize,
    pub epoch: usize,
    /// Mean absolute off-diagonal correlation of the weighted classifier
    /// inputs pooled over the window's batches.
    pub off_diag_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub seed: u64,
    pub latent_dim: usize,
    pub steps: usize,
    /// Mean weighted loss per sample, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    /// Weighted loss per step.
    pub step_loss: Vec<f64>,
    /// Post-optimisation HSIC objective per step (kernel method only).
    pub step_objective: Vec<f64>,
    /// Steps whose weight optimisation reported convergence.
    pub hsic_converged_steps: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    /// First and last trajectory values.
    pub initial_off_diag: Option<f64>,
    pub final_off_diag: Option<f64>,
    pub sigma: Option<f64>,
    pub train_accuracy: f64,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
    /// Wall time; excluded from determinism guarantees.
    pub mean_step_ms: f64,
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub classifier: LinearClassifier,
    pub state: TransformState,
}

struct StepOutput {
    loss: f64,
    objective: Option<f64>,
    converged: bool,
    features: DenseMatrix,
    weights: Vec<f64>,
}

/// Mutable state of one run. Exposed so benchmarks can drive single steps.
pub struct Trainer {
    cfg: TrainConfig,
    width: usize,
    rng: ChaCha8Rng,
    clf: LinearClassifier,
    linear: Option<Whitener>,
    kernel: Option<KernelState>,
}

struct KernelState {
    cfg: KernelConfig,
    bank: GlobalFeatureBank,
    whitener: Option<Whitener>,
    /// Features collected during the current epoch for the next refit.
    collected: Vec<f64>,
    last_batch: Option<DenseMatrix>,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, train: &LabeledSplit) -> Result<Self> {
        cfg.validate()?;
        if train.len() < cfg.batch_size {
            return Err(KwError::InsufficientData {
                context: "training split",
                needed: cfg.batch_size,
                got: train.len(),
            });
        }
        if train.classes < 2 {
            return Err(KwError::param("classes", "training split needs at least 2 classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = train.dim();
        let (width, linear, kernel) = match cfg.method {
            Method::Plain => (d, None, None),
            Method::LinearWhiten => (cfg.latent_dim.min(d), None, None),
            Method::KernelWhiten => {
                let bank = init_bank(&train.features, cfg.bank_size(), rng.gen(), cfg.alpha_max)?;
                let kcfg = match cfg.kernel {
                    KernelSetting::Fixed(k) => k,
                    KernelSetting::Auto(_) => {
                        // first batch of the first epoch, replayed from a cloned stream
                        let order = epoch_order(&mut rng.clone(), train.len());
                        let first = train.features.select_rows(&order[..cfg.batch_size]);
                        KernelConfig::rbf(median_bandwidth(&first.vstack(&bank.rows)?, cfg.seed)?)?
                    }
                };
                let state = KernelState {
                    cfg: kcfg,
                    bank,
                    whitener: None,
                    collected: Vec::new(),
                    last_batch: None,
                };
                (cfg.latent_dim, None, Some(state))
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            width,
            rng,
            clf: LinearClassifier::zeros(width, train.classes)?,
            linear,
            kernel,
        })
    }

    /// Per-epoch fits, run before the epoch's first step: the linear
    /// whitener on the training features, and the epoch-scoped kernel
    /// whitener on the features collected during the previous epoch.
    pub fn begin_epoch(&mut self, train: &LabeledSplit) -> Result<()> {
        match self.cfg.method {
            Method::Plain => {}
            Method::LinearWhiten => {
                self.linear = Some(fit_whitener(&train.features, self.width, self.cfg.ridge)?);
            }
            Method::KernelWhiten if self.cfg.whiten_scope == WhitenScope::Epoch => {
                let ks = self.kernel.as_mut().expect("kernel state");
                if ks.collected.is_empty() {
                    warm_up_whitener(ks, train, &self.cfg)?;
                } else {
                    let rows = ks.collected.len() / self.width;
                    let phi = DenseMatrix::new(rows, self.width, std::mem::take(&mut ks.collected))?;
                    ks.whitener = Some(fit_zca_whitener(&phi, self.cfg.ridge)?);
                }
            }
            Method::KernelWhiten => {}
        }
        Ok(())
    }

    pub fn classifier(&self) -> &LinearClassifier {
        &self.clf
    }

    pub fn bank(&self) -> Option<&GlobalFeatureBank> {
        self.kernel.as_ref().map(|k| &k.bank)
    }

    pub fn sigma(&self) -> Option<f64> {
        self.kernel.as_ref().map(|k| k.cfg.sigma)
    }

    /// Batches for the next epoch, as row indices into the training split.
    pub fn next_epoch_batches(&mut self, n: usize) -> Vec<Vec<usize>> {
        let order = epoch_order(&mut self.rng, n);
        let l = self.cfg.batch_size;
        let keep_remainder = self.cfg.method != Method::KernelWhiten;
        order
            .chunks(l)
            .filter(|c| c.len() == l || keep_remainder)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// One optimisation step; returns the weighted batch loss.
    pub fn step(&mut self, x: &DenseMatrix, labels: &[usize]) -> Result<f64> {
        Ok(self.step_inner(x, labels)?.loss)
    }

    fn step_inner(&mut self, x: &DenseMatrix, labels: &[usize]) -> Result<StepOutput> {
        let n = x.rows();
        let (features, weights, objective, converged) = match self.cfg.method {
            Method::Plain => (x.clone(), vec![1.0; n], None, true),
            Method::LinearWhiten => {
                let w = self.linear.as_ref().ok_or_else(not_started)?;
                (w.apply(x).map_err(stage("whiten"))?, vec![1.0; n], None, true)
            }
            Method::KernelWhiten => {
                let ks = self.kernel.as_mut().expect("kernel state");
                let phi = batch_features(x, &ks.bank.rows, &ks.cfg, self.cfg.ridge).map_err(stage("kernel features"))?;
                let psi = match self.cfg.whiten_scope {
                    WhitenScope::Batch => fit_whitener(&phi, phi.cols(), self.cfg.ridge)
                        .and_then(|w| w.apply(&phi))
                        .map_err(stage("whiten"))?,
                    WhitenScope::Epoch => {
                        ks.collected.extend_from_slice(phi.as_slice());
                        let w = ks.whitener.as_ref().ok_or_else(not_started)?;
                        w.apply(&phi).map_err(stage("whiten"))?
                    }
                    WhitenScope::None => phi,
                };
                let sol = optimize_weights(&psi, &self.cfg.hsic).map_err(stage("sample weights"))?;
                update_bank(&mut ks.bank, x, &mut self.rng).map_err(stage("bank update"))?;
                ks.last_batch = Some(x.clone());
                (psi, sol.weights.into_vec(), Some(sol.objective), sol.converged)
            }
        };
        let (loss, grads) = loss_and_gradient(&self.clf, &features, labels, &weights).map_err(stage("loss"))?;
        sgd_step(&mut self.clf, &grads, self.cfg.lr / n as f64).map_err(stage("update"))?;
        Ok(StepOutput {
            loss,
            objective,
            converged,
            features,
            weights,
        })
    }

    /// Freezes the evaluation transform. For the kernel method the landmark
    /// set is the last training batch stacked on the final bank, so each
    /// training row of that batch maps to exactly the features it was
    /// trained on. The epoch-scoped whitener is the one in force during the
    /// last epoch.
    pub fn transform_state(&self) -> Result<TransformState> {
        Ok(match self.cfg.method {
            Method::Plain => TransformState::Plain,
            Method::LinearWhiten => TransformState::Linear {
                whitener: self.linear.clone().ok_or_else(not_started)?,
            },
            Method::KernelWhiten => {
                let ks = self.kernel.as_ref().expect("kernel state");
                let batch = ks
                    .last_batch
                    .as_ref()
                    .ok_or_else(|| KwError::DegenerateData("no training step was run".into()))?;
                let map = fit_on_landmarks(batch.vstack(&ks.bank.rows)?, &ks.cfg, self.cfg.ridge)?;
                let whitener = match self.cfg.whiten_scope {
                    WhitenScope::Epoch => ks.whitener.clone(),
                    _ => None,
                };
                TransformState::Kernel { map, whitener }
            }
        })
    }
}

/// Fits the first epoch's whitener on features of the training set
/// computed against the initial bank, without touching the bank.
fn not_started() -> KwError {
    KwError::DegenerateData("begin_epoch must run before the first step".into())
}

fn warm_up_whitener(ks: &mut KernelState, train: &LabeledSplit, cfg: &TrainConfig) -> Result<()> {
    let l = cfg.batch_size;
    let mut collected = Vec::new();
    let mut rows = 0;
    for start in (0..train.len() - l + 1).step_by(l) {
        let idx: Vec<usize> = (start..start + l).collect();
        let phi = batch_features(&train.features.select_rows(&idx), &ks.bank.rows, &ks.cfg, cfg.ridge)?;
        collected.extend_from_slice(phi.as_slice());
        rows += l;
    }
    let phi = DenseMatrix::new(rows, cfg.latent_dim, collected)?;
    ks.whitener = Some(fit_zca_whitener(&phi, cfg.ridge)?);
    Ok(())
}

fn epoch_order(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn stage(name: &'static str) -> impl Fn(KwError) -> KwError {
    move |e| KwError::Step {
        epoch: 0,
        step: 0,
        stage: name,
        source: Box::new(e),
    }
}

fn locate(e: KwError, epoch: usize, step: usize) -> KwError {
    match e {
        KwError::Step { stage, source, .. } => KwError::Step {
            epoch,
            step,
            stage,
            source,
        },
        other => KwError::Step {
            epoch,
            step,
            stage: "step",
            source: Box::new(other),
        },
    }
}

/// Classifier inputs and sample weights pooled over consecutive steps.
#[derive(Default)]
struct Window {
    start: usize,
    epoch: usize,
    steps: usize,
    width: usize,
    rows: Vec<f64>,
    weights: Vec<f64>,
}

impl Window {
    fn push(&mut self, step: usize, epoch: usize, features: &DenseMatrix, weights: &[f64]) {
        if self.steps == 0 {
            self.start = step;
            self.epoch = epoch;
            self.width = features.cols();
        }
        self.steps += 1;
        self.rows.extend_from_slice(features.as_slice());
        self.weights.extend_from_slice(weights);
    }

    /// Closes the window. Degenerate windows (too few varying columns)
    /// yield no point.
    fn flush(&mut self) -> Option<TrajectoryPoint> {
        let rows = std::mem::take(&mut self.rows);
        let weights = std::mem::take(&mut self.weights);
        self.steps = 0;
        let x = DenseMatrix::new(weights.len(), self.width, rows).ok()?;
        let r = weighted_off_diag_correlation(&x, &weights).ok()?;
        Some(TrajectoryPoint {
            step: self.start,
            epoch: self.epoch,
            off_diag_correlation: r,
        })
    }
}

/// Runs one full training job and evaluates it on all three splits.
pub fn train_run(cfg: &TrainConfig, data: &DatasetSplits) -> Result<TrainOutcome> {
    let train = &data.train;
    for split in [&data.test_id, &data.test_ood] {
        if split.dim() != train.dim() {
            return Err(KwError::dims("split width", train.dim(), split.dim()));
        }
    }
    let mut trainer = Trainer::new(cfg, train)?;

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut step_loss = Vec::new();
    let mut step_objective = Vec::new();
    let mut trajectory = Vec::new();
    let mut window = Window::default();
    let mut hsic_converged_steps = 0;
    let mut elapsed = 0.0;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        trainer.begin_epoch(train).map_err(|e| locate(e, epoch, step))?;
        elapsed += start.elapsed().as_secs_f64();
        let batches = trainer.next_epoch_batches(train.len());
        let mut total = 0.0;
        let mut seen = 0;
        for idx in &batches {
            let x = train.features.select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let start = Instant::now();
            let out = trainer.step_inner(&x, &y).map_err(|e| locate(e, epoch, step))?;
            elapsed += start.elapsed().as_secs_f64();

            total += out.loss;
            seen += idx.len();
            step_loss.push(out.loss);
            if let Some(obj) = out.objective {
                step_objective.push(obj);
                hsic_converged_steps += usize::from(out.converged);
            }
            window.push(step, epoch, &out.features, &out.weights);
            if window.steps == cfg.trajectory_every {
                trajectory.extend(window.flush());
            }
            step += 1;
        }
        epoch_loss.push(total / seen as f64);
    }

    let initial_off_diag = trajectory.first().map(|p| p.off_diag_correlation);
    let final_off_diag = trajectory.last().map(|p| p.off_diag_correlation);
    let state = trainer.transform_state()?;
    let clf = trainer.clf.clone();
    let report = TrainReport {
        method: cfg.method,
        seed: cfg.seed,
        latent_dim: cfg.latent_dim,
        steps: step,
        epoch_loss,
        step_loss,
        step_objective,
        hsic_converged_steps,
        trajectory,
        initial_off_diag,
        final_off_diag,
        sigma: trainer.sigma(),
        train_accuracy: evaluate(&clf, &state, train)?,
        id_accuracy: evaluate(&clf, &state, &data.test_id)?,
        ood_accuracy: evaluate(&clf, &state, &data.test_ood)?,
        mean_step_ms: 1e3 * elapsed / step.max(1) as f64,
    };
    Ok(TrainOutcome {
        report,
        classifier: clf,
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    pub mean_step_ms: f64,
    /// Relative cost with the first row at 100.
    pub normalized: f64,
}

/// Mean wall time per training step for each configuration, measured after
/// `warm_steps` untimed steps on the same data. The first configuration is
/// the reference and is normalised to 100.
pub fn timing_bench(
    cfgs: &[(String, TrainConfig)],
    train: &LabeledSplit,
    warm_steps: usize,
    timed_steps: usize,
) -> Result<Vec<TimingRow>> {
    if cfgs.is_empty() || timed_steps == 0 {
        return Err(KwError::param("timing_bench", "needs at least one config and one timed step"));
    }
    let mut rows = Vec::with_capacity(cfgs.len());
    for (label, cfg) in cfgs {
        let mut trainer = Trainer::new(cfg, train)?;
        let mut queue: Vec<Vec<usize>> = Vec::new();
        let run = |trainer: &mut Trainer, queue: &mut Vec<Vec<usize>>| -> Result<f64> {
            let mut secs = 0.0;
            if queue.is_empty() {
                let start = Instant::now();
                trainer.begin_epoch(train)?;
                secs += start.elapsed().as_secs_f64();
                *queue = trainer.next_epoch_batches(train.len());
                queue.reverse();
            }
            let idx = queue.pop().expect("non-empty epoch");
            let x = train.features.select_rows(&idx);
            let y: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let start = Instant::now();
            trainer.step_inner(&x, &y)?;
            Ok(secs + start.elapsed().as_secs_f64())
        };
        for _ in 0..warm_steps {
            run(&mut trainer, &mut queue)?;
        }
        let mut total = 0.0;
        for _ in 0..timed_steps {
            total += run(&mut trainer, &mut queue)?;
        }
        rows.push(TimingRow {
            label: label.clone(),
            mean_step_ms: 1e3 * total / timed_steps as f64,
            normalized: 0.0,
        });
    }
    let base = rows[0].mean_step_ms;
    for r in &mut rows {
        r.normalized = 100.0 * r.mean_step_ms / base;
    }
    rows[0].normalized = 100.0;
    Ok(rows)
}
