use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kw_cli::commands;
use kw_cli::RunConfig;
use kw_core::FileFormat;

#[derive(Parser)]
#[command(name = "kw", version, about = "Kernel whitening experiments on embedding files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Csv,
}

impl From<Format> for FileFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => FileFormat::Binary,
            Format::Csv => FileFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test_id/test_ood embedding files.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: Format,
    },
    /// Train one model and write its run artifact.
    Train {
        /// Config file or a previous run artifact.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: PathBuf,
        /// Artifact path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run all methods over several seeds and write CSV summaries.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Print the normalized per-step timing table.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the header of an embedding file.
    Inspect { path: PathBuf },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData { config, out, format } => {
            let cfg = load_config(&config)?;
            for p in commands::gen_data(&cfg, &out, format.into())? {
                println!("{}", p.display());
            }
        }
        Command::Train { config, data_dir, out, format } => {
            let cfg = load_config(&config)?;
            let artifact = commands::train(&cfg, &data_dir, format.map(Into::into), &out)?;
            println!("{}", commands::result_line(&artifact.report));
        }
        Command::Compare { config, data_dir, seeds, jobs, out, format } => {
            let cfg = load_config(&config)?;
            let data = commands::load_data_dir(&data_dir, format.map(Into::into))?;
            let result = commands::compare(&cfg, &data, &seeds, jobs)?;
            commands::write_compare(&result, &out)?;
            for r in &result.runs {
                println!("{}", commands::result_line(r));
            }
        }
        Command::Bench { config } => {
            let cfg = load_config(&config)?;
            print!("{}", commands::format_bench(&commands::bench(&cfg)?));
        }
        Command::Inspect { path } => println!("{}", commands::inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KW_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
