//! Synthetic biased datasets and embedding-file I/O.
//!
//! Binary layout (little endian):
//!
//! ```text
//! "KWEM" | version u16 | n u64 | d u64 | classes u16 | split u8
//! n·d f64 features (row-major) | n u32 labels | optional d u8 column roles
//! ```
//!
//! Column roles are `0` causal, `1` spurious, `2` unknown.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{KwError, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: [u8; 4] = *b"KWEM";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: u64 = 4 + 2 + 8 + 8 + 2 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    TestId,
    TestOod,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::TestId, SplitTag::TestOod];

    pub fn code(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::TestId => 1,
            SplitTag::TestOod => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SplitTag::Train),
            1 => Ok(SplitTag::TestId),
            2 => Ok(SplitTag::TestOod),
            other => Err(KwError::Malformed(format!("unknown split tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::TestId => "test_id",
            SplitTag::TestOod => "test_ood",
        }
    }

    /// Guesses the split from a file name such as `test_ood.csv`.
    pub fn from_file_name(path: &Path) -> Self {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if stem.contains("test_ood") || stem.contains("ood") {
            SplitTag::TestOod
        } else if stem.contains("test_id") || stem.contains("test") {
            SplitTag::TestId
        } else {
            SplitTag::Train
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: SplitTag,
    pub causal_cols: Vec<usize>,
    pub spurious_cols: Vec<usize>,
}

impl LabeledSplit {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, classes: usize, split: SplitTag) -> Result<Self> {
        let s = Self {
            features,
            labels,
            classes,
            split,
            causal_cols: Vec::new(),
            spurious_cols: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.rows() {
            return Err(KwError::dims("split labels", self.features.rows(), self.labels.len()));
        }
        if let Some((row, &label)) = self.labels.iter().enumerate().find(|(_, &y)| y >= self.classes) {
            return Err(KwError::LabelOutOfRange {
                row,
                label,
                classes: self.classes,
            });
        }
        let d = self.features.cols();
        for &c in self.causal_cols.iter().chain(&self.spurious_cols) {
            if c >= d {
                return Err(KwError::Malformed(format!("column role index {c} out of range for width {d}")));
            }
        }
        if self.causal_cols.iter().any(|c| self.spurious_cols.contains(c)) {
            return Err(KwError::Malformed("causal and spurious columns overlap".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Copy restricted to the given feature columns; roles are dropped.
    pub fn select_columns(&self, cols: &[usize]) -> Result<LabeledSplit> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.dim()) {
            return Err(KwError::dims("select_columns", format!("< {}", self.dim()), c));
        }
        let features = DenseMatrix::from_fn(self.len(), cols.len(), |i, j| self.features[(i, cols[j])]);
        LabeledSplit::new(features, self.labels.clone(), self.classes, self.split)
    }

    fn roles(&self) -> Option<Vec<u8>> {
        if self.causal_cols.is_empty() && self.spurious_cols.is_empty() {
            return None;
        }
        let mut roles = vec![2u8; self.dim()];
        self.causal_cols.iter().for_each(|&c| roles[c] = 0);
        self.spurious_cols.iter().for_each(|&c| roles[c] = 1);
        Some(roles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpuriousMode {
    /// Class-dependent Gaussian means on the spurious block.
    Linear,
    /// Class-dependent axes in each pair of spurious columns, with a random
    /// sign per pair, so every class has zero spurious mean.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasGenConfig {
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
    pub seed: u64,
}

impl Default for BiasGenConfig {
    fn default() -> Self {
        Self::biased_nonlinear_v1()
    }
}

impl BiasGenConfig {
    /// The default benchmark.
    pub fn biased_nonlinear_v1() -> Self {
        Self {
            n_train: 2000,
            n_test_id: 500,
            n_test_ood: 500,
            d_causal: 6,
            d_spurious: 6,
            classes: 2,
            rho_train: 0.95,
            rho_ood: 0.5,
            spurious_mode: SpuriousMode::Nonlinear,
            margin: 2.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.classes;
        if c < 2 || c > u16::MAX as usize {
            return Err(KwError::param("classes", format!("must be in 2..=65535, got {c}")));
        }
        for (name, n) in [("n_train", self.n_train), ("n_test_id", self.n_test_id), ("n_test_ood", self.n_test_ood)] {
            if n < 10 * c {
                return Err(KwError::param(name, format!("need at least {} samples, got {n}", 10 * c)));
            }
        }
        for (name, rho) in [("rho_train", self.rho_train), ("rho_ood", self.rho_ood)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(KwError::param(name, format!("must be in [0, 1], got {rho}")));
            }
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(KwError::param("margin", format!("must be positive, got {}", self.margin)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(KwError::param("noise_sd", format!("must be positive, got {}", self.noise_sd)));
        }
        if self.d_causal < c {
            return Err(KwError::param("d_causal", format!("must be at least classes = {c}, got {}", self.d_causal)));
        }
        match self.spurious_mode {
            SpuriousMode::Linear if self.d_spurious < c => Err(KwError::param(
                "d_spurious",
                format!("linear mode needs at least classes = {c}, got {}", self.d_spurious),
            )),
            SpuriousMode::Nonlinear if self.d_spurious < 2 => Err(KwError::param(
                "d_spurious",
                format!("nonlinear mode needs at least 2, got {}", self.d_spurious),
            )),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.d_causal + self.d_spurious
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: LabeledSplit,
    pub test_id: LabeledSplit,
    pub test_ood: LabeledSplit,
}

impl DatasetSplits {
    pub fn get(&self, tag: SplitTag) -> &LabeledSplit {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::TestId => &self.test_id,
            SplitTag::TestOod => &self.test_ood,
        }
    }
}

/// Draws train, test-ID and test-OOD splits. Columns `0..d_causal` carry the
/// label through class means spaced `margin` apart; the remaining columns
/// carry a pattern that agrees with the label with probability `rho`
/// (otherwise a uniformly chosen other class).
pub fn generate_biased(cfg: &BiasGenConfig) -> Result<DatasetSplits> {
    cfg.validate()?;
    let make = |tag: SplitTag, n: usize, rho: f64| generate_split(cfg, tag, n, rho);
    Ok(DatasetSplits {
        train: make(SplitTag::Train, cfg.n_train, cfg.rho_train)?,
        test_id: make(SplitTag::TestId, cfg.n_test_id, cfg.rho_train)?,
        test_ood: make(SplitTag::TestOod, cfg.n_test_ood, cfg.rho_ood)?,
    })
}

fn generate_split(cfg: &BiasGenConfig, tag: SplitTag, n: usize, rho: f64) -> Result<LabeledSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tag.code() as u64 + 1);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| KwError::param("noise_sd", e.to_string()))?;
    let c = cfg.classes;
    let d = cfg.dim();

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);

    let causal_scale = cfg.margin / 2f64.sqrt();
    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        for j in 0..cfg.d_causal {
            let mean = if j == y { causal_scale } else { 0.0 };
            data.push(mean + noise.sample(&mut rng));
        }
        let pattern = if rng.gen_bool(rho) {
            y
        } else {
            let other = rng.gen_range(0..c - 1);
            if other >= y { other + 1 } else { other }
        };
        match cfg.spurious_mode {
            SpuriousMode::Linear => {
                for j in 0..cfg.d_spurious {
                    let mean = if c == 2 {
                        if pattern == 0 { -cfg.margin / 2.0 } else { cfg.margin / 2.0 }
                    } else if j % c == pattern {
                        causal_scale
                    } else {
                        0.0
                    };
                    data.push(mean + noise.sample(&mut rng));
                }
            }
            SpuriousMode::Nonlinear => {
                let theta = PI * pattern as f64 / c as f64;
                for _ in 0..cfg.d_spurious / 2 {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    data.push(sign * cfg.margin * theta.cos() + noise.sample(&mut rng));
                    data.push(sign * cfg.margin * theta.sin() + noise.sample(&mut rng));
                }
                if cfg.d_spurious % 2 == 1 {
                    data.push(noise.sample(&mut rng));
                }
            }
        }
    }
    let mut split = LabeledSplit::new(DenseMatrix::new(n, d, data)?, labels, c, tag)?;
    split.causal_cols = (0..cfg.d_causal).collect();
    split.spurious_cols = (cfg.d_causal..d).collect();
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Binary,
    Csv,
}

impl FileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Binary => "kwem",
            FileFormat::Csv => "csv",
        }
    }
}

pub fn save_embeddings(split: &LabeledSplit, path: &Path, format: FileFormat) -> Result<()> {
    split.validate()?;
    match format {
        FileFormat::Binary => save_binary(split, path),
        FileFormat::Csv => save_csv(split, path),
    }
}

fn save_binary(split: &LabeledSplit, path: &Path) -> Result<()> {
    if split.classes > u16::MAX as usize {
        return Err(KwError::param("classes", "does not fit the u16 header field"));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(split.len() as u64).to_le_bytes())?;
    out.write_all(&(split.dim() as u64).to_le_bytes())?;
    out.write_all(&(split.classes as u16).to_le_bytes())?;
    out.write_all(&[split.split.code()])?;
    for v in split.features.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    for &y in &split.labels {
        let y = u32::try_from(y).map_err(|_| KwError::param("labels", "label exceeds u32"))?;
        out.write_all(&y.to_le_bytes())?;
    }
    if let Some(roles) = split.roles() {
        out.write_all(&roles)?;
    }
    out.flush()?;
    Ok(())
}

fn save_csv(split: &LabeledSplit, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..split.dim()).map(|j| format!("f{j}")))
        .collect();
    w.write_record(&header)?;
    for i in 0..split.len() {
        let record: Vec<String> = std::iter::once(split.labels[i].to_string())
            .chain(split.features.row(i).iter().map(|v| format!("{v:.16e}")))
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Header fields of a binary embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmbeddingHeader {
    pub version: u16,
    pub n: u64,
    pub d: u64,
    pub classes: u16,
    pub split: SplitTag,
}

impl EmbeddingHeader {
    /// Bytes up to and including the label section.
    pub fn payload_bytes(&self) -> Option<u64> {
        let cells = self.n.checked_mul(self.d)?;
        HEADER_BYTES
            .checked_add(cells.checked_mul(8)?)?
            .checked_add(self.n.checked_mul(4)?)
    }
}

fn parse_header(bytes: &[u8]) -> Result<EmbeddingHeader> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(KwError::BadMagic { found });
    }
    if (bytes.len() as u64) < HEADER_BYTES {
        return Err(KwError::Truncated {
            expected: HEADER_BYTES,
            actual: bytes.len() as u64,
        });
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != FORMAT_VERSION {
        return Err(KwError::UnsupportedVersion(version));
    }
    Ok(EmbeddingHeader {
        version,
        n: u64_at(6),
        d: u64_at(14),
        classes: u16_at(22),
        split: SplitTag::from_code(bytes[24])?,
    })
}

/// Reads only the header of a binary embedding file.
pub fn read_header(path: &Path) -> Result<EmbeddingHeader> {
    let mut buf = Vec::with_capacity(HEADER_BYTES as usize);
    File::open(path)?.take(HEADER_BYTES).read_to_end(&mut buf)?;
    parse_header(&buf)
}

/// Loads a binary file (recognised by its magic bytes) or a `.csv` file.
pub fn load_embeddings(path: &Path) -> Result<LabeledSplit> {
    let bytes = std::fs::read(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv && !bytes.starts_with(&MAGIC) {
        return load_csv(path);
    }
    decode_binary(&bytes)
}

fn decode_binary(bytes: &[u8]) -> Result<LabeledSplit> {
    let header = parse_header(bytes)?;
    let actual = bytes.len() as u64;
    let base = header
        .payload_bytes()
        .ok_or_else(|| KwError::Malformed("header sizes overflow".into()))?;
    if actual < base {
        return Err(KwError::Truncated { expected: base, actual });
    }
    let extra = actual - base;
    let roles = if extra == 0 {
        None
    } else if extra == header.d {
        Some(&bytes[base as usize..])
    } else if extra < header.d {
        return Err(KwError::Truncated {
            expected: base + header.d,
            actual,
        });
    } else {
        return Err(KwError::TrailingBytes { extra: extra - header.d });
    };

    let (n, d) = (header.n as usize, header.d as usize);
    let mut offset = HEADER_BYTES as usize;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes")));
        offset += 8;
    }
    let classes = header.classes as usize;
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let label = u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes")) as usize;
        offset += 4;
        if label >= classes {
            return Err(KwError::LabelOutOfRange { row, label, classes });
        }
        labels.push(label);
    }
    let mut split = LabeledSplit::new(DenseMatrix::new(n, d, data)?, labels, classes, header.split)?;
    if let Some(roles) = roles {
        for (j, &r) in roles.iter().enumerate() {
            match r {
                0 => split.causal_cols.push(j),
                1 => split.spurious_cols.push(j),
                2 => {}
                other => return Err(KwError::Malformed(format!("column {j} has unknown role {other}"))),
            }
        }
    }
    Ok(split)
}

fn load_csv(path: &Path) -> Result<LabeledSplit> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(KwError::Malformed("first CSV column must be `label`".into()));
    }
    let d = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != d + 1 {
            return Err(KwError::Malformed(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                d + 1
            )));
        }
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| KwError::Malformed(format!("row {row}: bad label `{}`", &record[0])))?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| KwError::Malformed(format!("row {row}: bad value `{field}`")))?;
            data.push(v);
        }
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    LabeledSplit::new(
        DenseMatrix::new(labels.len(), d, data)?,
        labels,
        classes,
        SplitTag::from_file_name(path),
    )
}

/// Canonical file name for a split, e.g. `test_ood.kwem`.
pub fn split_file_name(tag: SplitTag, format: FileFormat) -> String {
    format!("{}.{}", tag.name(), format.extension())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{accuracy, train_full_batch};

    fn small(mode: SpuriousMode, rho_train: f64, rho_ood: f64, seed: u64) -> BiasGenConfig {
        BiasGenConfig {
            rho_train,
            rho_ood,
            spurious_mode: mode,
            seed,
            ..BiasGenConfig::biased_nonlinear_v1()
        }
    }

    fn probe_accuracy(train: &LabeledSplit, test: &LabeledSplit, cols: &[usize]) -> (f64, f64) {
        let tr = train.select_columns(cols).unwrap();
        let te = test.select_columns(cols).unwrap();
        let clf = train_full_batch(&tr.features, &tr.labels, tr.classes, 300, 0.5).unwrap();
        (
            accuracy(&clf.predict(&tr.features).unwrap(), &tr.labels).unwrap(),
            accuracy(&clf.predict(&te.features).unwrap(), &te.labels).unwrap(),
        )
    }

    #[test]
    fn linear_spurious_probe_and_chance_on_ood() {
        let cfg = BiasGenConfig {
            rho_train: 1.0,
            rho_ood: 0.5,
            spurious_mode: SpuriousMode::Linear,
            n_test_ood: 20_000,
            ..Default::default()
        };
        let s = generate_biased(&cfg).unwrap();
        let cols = s.train.spurious_cols.clone();
        let (train_acc, ood_acc) = probe_accuracy(&s.train, &s.test_ood, &cols);
        assert!(train_acc >= 0.99, "{train_acc}");
        assert!((ood_acc - 0.5).abs() <= 0.03, "{ood_acc}");
    }

    #[test]
    fn nonlinear_spurious_block_defeats_linear_probe() {
        let s = generate_biased(&small(SpuriousMode::Nonlinear, 1.0, 0.5, 1)).unwrap();
        let cols = s.train.spurious_cols.clone();
        let (train_acc, _) = probe_accuracy(&s.train, &s.test_id, &cols);
        assert!(train_acc < 0.6, "{train_acc}");
    }

    #[test]
    fn labels_are_balanced() {
        let cfg = BiasGenConfig {
            classes: 3,
            n_train: 301,
            ..Default::default()
        };
        let s = generate_biased(&cfg).unwrap();
        for tag in SplitTag::ALL {
            let counts = s.get(tag).class_counts();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{tag:?} {counts:?}");
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_dependent() {
        let cfg = BiasGenConfig::default();
        assert_eq!(generate_biased(&cfg).unwrap(), generate_biased(&cfg).unwrap());
        let other = BiasGenConfig { seed: 1, ..cfg };
        assert_ne!(generate_biased(&other).unwrap().train, generate_biased(&BiasGenConfig::default()).unwrap().train);
    }

    #[test]
    fn config_validation() {
        let base = BiasGenConfig::default();
        for bad in [
            BiasGenConfig { rho_train: 1.5, ..base.clone() },
            BiasGenConfig { n_test_id: 5, ..base.clone() },
            BiasGenConfig { classes: 1, ..base.clone() },
            BiasGenConfig { margin: 0.0, ..base.clone() },
            BiasGenConfig { d_causal: 1, ..base.clone() },
        ] {
            assert!(matches!(generate_biased(&bad), Err(KwError::InvalidParameter { .. })));
        }
    }

    #[test]
    fn binary_round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_biased(&BiasGenConfig::default()).unwrap().test_ood;
        let path = dir.path().join("x.kwem");
        save_embeddings(&s, &path, FileFormat::Binary).unwrap();
        let (n, d) = (s.len() as u64, s.dim() as u64);
        let size = std::fs::metadata(&path).unwrap().len();
        assert_eq!(size, 25 + 8 * n * d + 4 * n + d);
        assert_eq!(load_embeddings(&path).unwrap(), s);

        let bare = LabeledSplit::new(s.features.clone(), s.labels.clone(), 2, SplitTag::Train).unwrap();
        save_embeddings(&bare, &path, FileFormat::Binary).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 25 + 8 * n * d + 4 * n);
        assert_eq!(load_embeddings(&path).unwrap(), bare);
    }

    #[test]
    fn binary_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let s = LabeledSplit::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]), vec![0, 1], 2, SplitTag::TestId).unwrap();
        let path = dir.path().join("s.kwem");
        save_embeddings(&s, &path, FileFormat::Binary).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(KwError::Truncated { expected: 65, actual: 62 })
        ));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_embeddings(&path), Err(KwError::BadMagic { .. })));

        let mut bad = bytes.clone();
        bad[61..65].copy_from_slice(&7u32.to_le_bytes());
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(KwError::LabelOutOfRange { row: 1, label: 7, classes: 2 })
        ));

        let mut bad = bytes.clone();
        bad.extend_from_slice(&[0, 0, 0]);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_embeddings(&path), Err(KwError::TrailingBytes { extra: 1 })));
    }

    #[test]
    fn empty_split_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let s = LabeledSplit::new(DenseMatrix::zeros(0, 4), vec![], 2, SplitTag::Train).unwrap();
        let bin = dir.path().join("e.kwem");
        save_embeddings(&s, &bin, FileFormat::Binary).unwrap();
        assert_eq!(std::fs::metadata(&bin).unwrap().len(), HEADER_BYTES);
        assert_eq!(load_embeddings(&bin).unwrap(), s);
        let csv_path = dir.path().join("train.csv");
        save_embeddings(&s, &csv_path, FileFormat::Csv).unwrap();
        let back = load_embeddings(&csv_path).unwrap();
        assert_eq!((back.len(), back.dim()), (0, 4));
    }

    #[test]
    fn csv_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_biased(&BiasGenConfig::default()).unwrap().test_id;
        let bin = dir.path().join("test_id.kwem");
        let csv_path = dir.path().join("test_id.csv");
        save_embeddings(&s, &bin, FileFormat::Binary).unwrap();
        save_embeddings(&s, &csv_path, FileFormat::Csv).unwrap();
        let a = load_embeddings(&bin).unwrap();
        let b = load_embeddings(&csv_path).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(b.split, SplitTag::TestId);
        assert!(a.features.sub(&b.features).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn header_reads_without_payload() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_biased(&BiasGenConfig::default()).unwrap().train;
        let path = dir.path().join("train.kwem");
        save_embeddings(&s, &path, FileFormat::Binary).unwrap();
        let h = read_header(&path).unwrap();
        assert_eq!((h.n, h.d, h.classes, h.split), (2000, 12, 2, SplitTag::Train));
    }
}
