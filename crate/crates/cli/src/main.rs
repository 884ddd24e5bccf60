use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use contextval::{run_experiment, write_csv, Experiment, ExperimentConfig};

/// Overrides the output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "CONTEXTVAL_OUT_DIR";

#[derive(Parser)]
#[command(name = "contextval", version, about = "Value-of-context simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV.
    Run {
        config: PathBuf,
        /// Output directory (default: $CONTEXTVAL_OUT_DIR, else the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Master seed, replacing the one in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Confidence multiplier for verdicts, replacing the config's z.
        #[arg(long)]
        z: Option<f64>,
        /// Write the CSV to stdout instead of a file.
        #[arg(long, conflicts_with = "out")]
        stdout: bool,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// List the available experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, threads, seed, z, stdout } => {
            let mut cfg = load(&config)?;
            if let Some(z) = z {
                anyhow::ensure!(z >= 0.0, "--z must be >= 0, got {z}");
                cfg.z = z;
            }
            if let Some(t) = threads {
                anyhow::ensure!(t > 0, "--threads must be positive");
                rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
            }
            let rows = run_experiment(&cfg, seed).with_context(|| format!("running {}", config.display()))?;
            if stdout {
                let lock = io::stdout().lock();
                write_csv(&rows, BufWriter::new(lock))?;
                return Ok(());
            }
            let dir = out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(cfg.output_name());
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&rows, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok ({} experiment, {} points)", config.display(), cfg.experiment, cfg.points().len());
            Ok(())
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.description());
            }
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let source = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_toml(&source).with_context(|| format!("invalid config {}", path.display()))
}
