//! Flat JSON run configuration.

use std::path::Path;

use anyhow::{bail, Context};
use kw_core::{BiasGenConfig, HsicOptConfig, KernelSetting, KwError, Method, SpuriousMode, TrainConfig, WhitenScope};
use serde::{Deserialize, Serialize};

/// Every generator and training knob by name. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds both the generator and the training run.
    pub seed: u64,

    pub n_train: usize,
    pub n_test_id: usize,
    pub n_test_ood: usize,
    pub d_causal: usize,
    pub d_spurious: usize,
    pub classes: usize,
    pub rho_train: f64,
    pub rho_ood: f64,
    pub spurious_mode: SpuriousMode,
    pub margin: f64,
    pub noise_sd: f64,

    pub method: Method,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub ridge: f64,
    pub alpha_max: f64,
    pub kernel: KernelSetting,
    pub whiten_scope: WhitenScope,
    pub trajectory_every: usize,
    pub hsic_max_iters: usize,
    pub hsic_step_size: Option<f64>,
    pub hsic_tol: f64,
    pub hsic_floor: f64,

    /// `compare` sweeps these instead of `latent_dim` when present.
    pub latent_dims: Option<Vec<usize>>,
    pub bench_warm_steps: usize,
    pub bench_timed_steps: usize,
    /// Adds a linear-whitening row on data of this width to `bench`.
    pub bench_wide_dim: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_parts(&BiasGenConfig::default(), &TrainConfig::default())
    }
}

impl RunConfig {
    pub fn from_parts(g: &BiasGenConfig, t: &TrainConfig) -> Self {
        Self {
            seed: t.seed,
            n_train: g.n_train,
            n_test_id: g.n_test_id,
            n_test_ood: g.n_test_ood,
            d_causal: g.d_causal,
            d_spurious: g.d_spurious,
            classes: g.classes,
            rho_train: g.rho_train,
            rho_ood: g.rho_ood,
            spurious_mode: g.spurious_mode,
            margin: g.margin,
            noise_sd: g.noise_sd,
            method: t.method,
            batch_size: t.batch_size,
            latent_dim: t.latent_dim,
            epochs: t.epochs,
            lr: t.lr,
            ridge: t.ridge,
            alpha_max: t.alpha_max,
            kernel: t.kernel,
            whiten_scope: t.whiten_scope,
            trajectory_every: t.trajectory_every,
            hsic_max_iters: t.hsic.max_iters,
            hsic_step_size: t.hsic.step_size,
            hsic_tol: t.hsic.tol,
            hsic_floor: t.hsic.floor,
            latent_dims: None,
            bench_warm_steps: 100,
            bench_timed_steps: 400,
            bench_wide_dim: None,
        }
    }

    pub fn generator(&self) -> BiasGenConfig {
        BiasGenConfig {
            n_train: self.n_train,
            n_test_id: self.n_test_id,
            n_test_ood: self.n_test_ood,
            d_causal: self.d_causal,
            d_spurious: self.d_spurious,
            classes: self.classes,
            rho_train: self.rho_train,
            rho_ood: self.rho_ood,
            spurious_mode: self.spurious_mode,
            margin: self.margin,
            noise_sd: self.noise_sd,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            method: self.method,
            batch_size: self.batch_size,
            latent_dim: self.latent_dim,
            epochs: self.epochs,
            lr: self.lr,
            seed: self.seed,
            ridge: self.ridge,
            hsic: HsicOptConfig {
                max_iters: self.hsic_max_iters,
                step_size: self.hsic_step_size,
                tol: self.hsic_tol,
                floor: self.hsic_floor,
            },
            alpha_max: self.alpha_max,
            kernel: self.kernel,
            whiten_scope: self.whiten_scope,
            trajectory_every: self.trajectory_every,
        }
    }

    /// Latent widths visited by `compare`.
    pub fn sweep_dims(&self) -> Vec<usize> {
        self.latent_dims.clone().unwrap_or_else(|| vec![self.latent_dim])
    }

    /// Semantic checks beyond what the JSON types enforce. Errors name the
    /// offending field.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.generator().validate().map_err(field_error)?;
        self.train().validate().map_err(field_error)?;
        if let Some(dims) = &self.latent_dims {
            if dims.is_empty() {
                bail!("invalid value for `latent_dims`: must not be empty");
            }
            for &l in dims {
                let t = TrainConfig { latent_dim: l, ..self.train() };
                t.validate()
                    .map_err(|e| anyhow::anyhow!("invalid value for `latent_dims`: entry {l}: {e}"))?;
            }
        }
        if self.bench_timed_steps == 0 {
            bail!("invalid value for `bench_timed_steps`: must be positive");
        }
        if let Some(w) = self.bench_wide_dim {
            if w <= self.d_causal {
                bail!("invalid value for `bench_wide_dim`: must exceed d_causal = {}, got {w}", self.d_causal);
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow::anyhow!("field `{path}`: {inner}")
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, or the echoed config of a run artifact.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let result = match value.get("config") {
            Some(inner) if value.get("report").is_some() => {
                let cfg: Self = serde_path_to_error::deserialize(inner)
                    .map_err(|e| anyhow::anyhow!("field `config.{}`: {}", e.path(), e.inner()))?;
                cfg.validate().map(|_| cfg)
            }
            _ => Self::parse(&text),
        };
        result.with_context(|| format!("invalid config {}", path.display()))
    }
}

fn field_error(e: KwError) -> anyhow::Error {
    match e {
        KwError::InvalidParameter { name, reason } => anyhow::anyhow!("invalid value for `{name}`: {reason}"),
        other => anyhow::Error::new(other),
    }
}
