//! Run artifacts: JSON with full-precision numbers and a structural validator.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use kw_core::{LinearClassifier, Method, TrainReport, TransformState};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub version: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub data_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub format_version: u32,
    pub config: RunConfig,
    pub report: TrainReport,
    pub classifier: LinearClassifier,
    pub transform: TransformState,
    pub environment: Environment,
}

impl RunArtifact {
    pub fn new(
        config: RunConfig,
        report: TrainReport,
        classifier: LinearClassifier,
        transform: TransformState,
        data_dir: &Path,
    ) -> Self {
        Self {
            format_version: ARTIFACT_VERSION,
            environment: Environment {
                seed: config.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp: chrono::Utc::now().to_rfc3339(),
                data_dir: data_dir.display().to_string(),
            },
            config,
            report,
            classifier,
            transform,
        }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        to_json_string(self)
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let value: Value = serde_json::from_str(text).context("artifact is not valid JSON")?;
        validate_artifact(&value)?;
        serde_path_to_error::deserialize(value).map_err(|e| anyhow::anyhow!("artifact field `{}`: {}", e.path(), e.inner()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("invalid artifact {}", path.display()))
    }
}

/// Writes every float as `d.ddddddddddddddddde±x` (17 significant digits).
/// Non-finite values become `null`.
#[derive(Default)]
struct FullPrecision(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision::default());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out)?)
}

fn field<'a>(v: &'a Value, path: &str) -> anyhow::Result<&'a Value> {
    let mut cur = v;
    for key in path.split('.') {
        cur = cur.get(key).with_context(|| format!("missing field `{path}`"))?;
    }
    Ok(cur)
}

fn uint(v: &Value, path: &str) -> anyhow::Result<u64> {
    field(v, path)?.as_u64().with_context(|| format!("field `{path}` must be a non-negative integer"))
}

fn num(v: &Value, path: &str) -> anyhow::Result<f64> {
    field(v, path)?.as_f64().with_context(|| format!("field `{path}` must be a number"))
}

fn array<'a>(v: &'a Value, path: &str) -> anyhow::Result<&'a Vec<Value>> {
    field(v, path)?.as_array().with_context(|| format!("field `{path}` must be an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> anyhow::Result<&'a str> {
    field(v, path)?.as_str().with_context(|| format!("field `{path}` must be a string"))
}

/// Structural and consistency checks on a parsed artifact.
pub fn validate_artifact(v: &Value) -> anyhow::Result<()> {
    let version = uint(v, "format_version")?;
    if version != u64::from(ARTIFACT_VERSION) {
        bail!("unsupported artifact format_version {version}");
    }
    for key in ["config", "report", "classifier", "transform", "environment"] {
        if !field(v, key)?.is_object() {
            bail!("field `{key}` must be an object");
        }
    }
    string(v, "environment.version")?;
    let stamp = string(v, "environment.timestamp")?;
    chrono::DateTime::parse_from_rfc3339(stamp).with_context(|| format!("bad timestamp {stamp:?}"))?;
    string(v, "environment.data_dir")?;
    if uint(v, "environment.seed")? != uint(v, "config.seed")? {
        bail!("environment.seed differs from config.seed");
    }

    let method: Method = serde_json::from_value(field(v, "report.method")?.clone()).context("field `report.method`")?;
    if field(v, "config.method")? != field(v, "report.method")? {
        bail!("report.method differs from config.method");
    }
    if uint(v, "report.seed")? != uint(v, "config.seed")? {
        bail!("report.seed differs from config.seed");
    }
    for key in ["train_accuracy", "id_accuracy", "ood_accuracy"] {
        let path = format!("report.{key}");
        let a = num(v, &path)?;
        if !(0.0..=1.0).contains(&a) {
            bail!("field `{path}` = {a} is outside [0, 1]");
        }
    }
    if num(v, "report.mean_step_ms")? < 0.0 {
        bail!("field `report.mean_step_ms` is negative");
    }

    let steps = uint(v, "report.steps")? as usize;
    let epochs = uint(v, "config.epochs")? as usize;
    let every = uint(v, "config.trajectory_every")? as usize;
    if array(v, "report.epoch_loss")?.len() != epochs {
        bail!("report.epoch_loss has {} entries for {epochs} epochs", array(v, "report.epoch_loss")?.len());
    }
    if array(v, "report.step_loss")?.len() != steps {
        bail!("report.step_loss length differs from report.steps = {steps}");
    }
    let objectives = array(v, "report.step_objective")?.len();
    let expected = if method == Method::KernelWhiten { steps } else { 0 };
    if objectives != expected {
        bail!("report.step_objective has {objectives} entries, expected {expected}");
    }
    let trajectory = array(v, "report.trajectory")?;
    if every == 0 || trajectory.len() > steps / every {
        bail!("report.trajectory has {} points for {steps} steps sampled every {every}", trajectory.len());
    }
    let mut next = 0;
    for (i, p) in trajectory.iter().enumerate() {
        let step = uint(p, "step").with_context(|| format!("report.trajectory[{i}]"))? as usize;
        if step < next || step % every != 0 || step + every > steps {
            bail!("report.trajectory[{i}].step = {step} is not a window start");
        }
        next = step + every;
        num(p, "off_diag_correlation").with_context(|| format!("report.trajectory[{i}]"))?;
    }

    let c = array(v, "classifier.bias")?.len() as u64;
    if c < 2 || uint(v, "classifier.weights.cols")? != c {
        bail!("classifier weights do not match its {c} classes");
    }
    Ok(())
}
