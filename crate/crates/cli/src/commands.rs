//! Subcommand implementations, callable without the binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kw_core::data::{generate_biased, load_embeddings, read_header, save_embeddings, split_file_name};
use kw_core::trainer::{timing_bench, TimingRow};
use kw_core::{train_run, DatasetSplits, FileFormat, Method, SplitTag, TrainOutcome, TrainReport};
use log::info;
use rayon::prelude::*;

use crate::artifact::RunArtifact;
use crate::config::RunConfig;

/// Writes `train`, `test_id` and `test_ood` files into `out_dir`.
pub fn gen_data(cfg: &RunConfig, out_dir: &Path, format: FileFormat) -> anyhow::Result<Vec<PathBuf>> {
    let splits = generate_biased(&cfg.generator())?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut paths = Vec::new();
    for tag in SplitTag::ALL {
        let path = out_dir.join(split_file_name(tag, format));
        save_embeddings(splits.get(tag), &path, format).with_context(|| format!("writing {}", path.display()))?;
        info!("wrote {} ({} rows)", path.display(), splits.get(tag).len());
        paths.push(path);
    }
    Ok(paths)
}

/// Loads the three splits, preferring binary files when both formats exist.
pub fn load_data_dir(dir: &Path, format: Option<FileFormat>) -> anyhow::Result<DatasetSplits> {
    let load = |tag: SplitTag| -> anyhow::Result<_> {
        let candidates = match format {
            Some(f) => vec![f],
            None => vec![FileFormat::Binary, FileFormat::Csv],
        };
        let path = candidates
            .iter()
            .map(|&f| dir.join(split_file_name(tag, f)))
            .find(|p| p.exists())
            .with_context(|| format!("no {} split in {}", tag.name(), dir.display()))?;
        let split = load_embeddings(&path).with_context(|| format!("loading {}", path.display()))?;
        Ok(split)
    };
    let data = DatasetSplits {
        train: load(SplitTag::Train)?,
        test_id: load(SplitTag::TestId)?,
        test_ood: load(SplitTag::TestOod)?,
    };
    Ok(data)
}

pub fn run_one(cfg: &RunConfig, data: &DatasetSplits) -> anyhow::Result<TrainOutcome> {
    Ok(train_run(&cfg.train(), data)?)
}

/// Trains, writes the artifact to `out` and returns it.
pub fn train(cfg: &RunConfig, data_dir: &Path, format: Option<FileFormat>, out: &Path) -> anyhow::Result<RunArtifact> {
    let data = load_data_dir(data_dir, format)?;
    let outcome = run_one(cfg, &data)?;
    let artifact = RunArtifact::new(cfg.clone(), outcome.report, outcome.classifier, outcome.state, data_dir);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    artifact.save(out)?;
    info!("wrote {}", out.display());
    Ok(artifact)
}

pub fn result_line(r: &TrainReport) -> String {
    format!(
        "RESULT method={} latent={} seed={} id_acc={} ood_acc={} step_ms={}",
        r.method, r.latent_dim, r.seed, r.id_accuracy, r.ood_accuracy, r.mean_step_ms
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub latent_dim: usize,
    pub n_seeds: usize,
    pub id_mean: f64,
    pub id_sd: f64,
    pub ood_mean: f64,
    pub ood_sd: f64,
    pub step_ms_mean: f64,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    /// In (method, latent_dim, seed) order.
    pub runs: Vec<TrainReport>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every method × latent width × seed on the same data, at most `jobs`
/// at a time. Results do not depend on `jobs`.
pub fn compare(cfg: &RunConfig, data: &DatasetSplits, seeds: &[u64], jobs: usize) -> anyhow::Result<CompareOutput> {
    if seeds.is_empty() {
        bail!("--seeds must list at least one seed");
    }
    let dims = cfg.sweep_dims();
    let cells: Vec<(Method, usize, u64)> = Method::ALL
        .into_iter()
        .flat_map(|m| dims.iter().flat_map(move |&l| seeds.iter().map(move |&s| (m, l, s))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let runs: Vec<TrainReport> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, latent_dim, seed)| {
                let cell = RunConfig { method, latent_dim, seed, ..cfg.clone() };
                info!("compare: method={method} latent={latent_dim} seed={seed}");
                run_one(&cell, data)
                    .map(|o| o.report)
                    .with_context(|| format!("run method={method} latent={latent_dim} seed={seed} failed"))
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let summary = runs
        .chunks(seeds.len())
        .map(|group| {
            let pick = |f: fn(&TrainReport) -> f64| group.iter().map(f).collect::<Vec<_>>();
            let (id_mean, id_sd) = mean_sd(&pick(|r| r.id_accuracy));
            let (ood_mean, ood_sd) = mean_sd(&pick(|r| r.ood_accuracy));
            SummaryRow {
                method: group[0].method,
                latent_dim: group[0].latent_dim,
                n_seeds: group.len(),
                id_mean,
                id_sd,
                ood_mean,
                ood_sd,
                step_ms_mean: mean_sd(&pick(|r| r.mean_step_ms)).0,
            }
        })
        .collect();
    Ok(CompareOutput { runs, summary })
}

fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(full).unwrap_or_default()
}

/// Writes `summary.csv`, `runs.csv` and `trajectories.csv` into `out_dir`.
pub fn write_compare(out: &CompareOutput, out_dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;

    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    w.write_record(["method", "latent_dim", "n_seeds", "id_mean", "id_sd", "ood_mean", "ood_sd", "step_ms_mean"])?;
    for r in &out.summary {
        w.write_record([
            r.method.name().to_string(),
            r.latent_dim.to_string(),
            r.n_seeds.to_string(),
            full(r.id_mean),
            full(r.id_sd),
            full(r.ood_mean),
            full(r.ood_sd),
            full(r.step_ms_mean),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("runs.csv"))?;
    w.write_record([
        "method",
        "latent_dim",
        "seed",
        "train_acc",
        "id_acc",
        "ood_acc",
        "initial_off_diag",
        "final_off_diag",
        "step_ms",
    ])?;
    for r in &out.runs {
        w.write_record([
            r.method.name().to_string(),
            r.latent_dim.to_string(),
            r.seed.to_string(),
            full(r.train_accuracy),
            full(r.id_accuracy),
            full(r.ood_accuracy),
            opt(r.initial_off_diag),
            opt(r.final_off_diag),
            full(r.mean_step_ms),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("trajectories.csv"))?;
    w.write_record(["method", "latent_dim", "seed", "step", "epoch", "off_diag_correlation"])?;
    for r in &out.runs {
        for p in &r.trajectory {
            w.write_record([
                r.method.name().to_string(),
                r.latent_dim.to_string(),
                r.seed.to_string(),
                p.step.to_string(),
                p.epoch.to_string(),
                full(p.off_diag_correlation),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-step timing of each method on data generated from `cfg`, normalised
/// so the plain row is 100.
pub fn bench(cfg: &RunConfig) -> anyhow::Result<Vec<TimingRow>> {
    let data = generate_biased(&cfg.generator())?;
    let cfgs: Vec<(String, _)> = [
        ("plain".to_string(), Method::Plain),
        ("linear_whiten".to_string(), Method::LinearWhiten),
        (format!("kernel_whiten-{}", cfg.latent_dim), Method::KernelWhiten),
    ]
    .into_iter()
    .map(|(label, method)| (label, RunConfig { method, ..cfg.clone() }.train()))
    .collect();
    let mut rows = timing_bench(&cfgs, &data.train, cfg.bench_warm_steps, cfg.bench_timed_steps)?;

    if let Some(wide) = cfg.bench_wide_dim {
        let wide_cfg = RunConfig {
            d_spurious: wide - cfg.d_causal,
            method: Method::LinearWhiten,
            latent_dim: wide,
            ..cfg.clone()
        };
        let wide_data = generate_biased(&wide_cfg.generator())?;
        let label = format!("linear_whiten-{wide}-wide");
        let row = timing_bench(
            &[(label, wide_cfg.train())],
            &wide_data.train,
            cfg.bench_warm_steps,
            cfg.bench_timed_steps,
        )?
        .remove(0);
        rows.push(TimingRow {
            normalized: 100.0 * row.mean_step_ms / rows[0].mean_step_ms,
            ..row
        });
    }
    Ok(rows)
}

pub fn format_bench(rows: &[TimingRow]) -> String {
    let mut s = format!("{:<28} {:>14} {:>12}\n", "method", "step_ms", "normalized");
    for r in rows {
        let _ = writeln!(s, "{:<28} {:>14.6} {:>12.1}", r.label, r.mean_step_ms, r.normalized);
    }
    s
}

/// Human-readable header of an embedding file.
pub fn inspect(path: &Path) -> anyhow::Result<String> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let split = load_embeddings(path)?;
        return Ok(format!(
            "format=csv split={} n={} d={} classes={}",
            split.split.name(),
            split.len(),
            split.dim(),
            split.classes
        ));
    }
    let h = read_header(path)?;
    Ok(format!(
        "format=binary version={} split={} n={} d={} classes={}",
        h.version,
        h.split.name(),
        h.n,
        h.d,
        h.classes
    ))
}
