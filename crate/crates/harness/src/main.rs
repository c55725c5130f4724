use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use oel_core::Variant;
use oel_harness::output::render_summary;
use oel_harness::{run_experiment_with, summarize_dir, write_outputs, ExperimentConfig};

#[derive(Parser)]
#[command(name = "oel", version, about = "Run and summarize open-ended learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every selected variant and write results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        variant: VariantArg,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long)]
        epochs: Option<u32>,
        /// Base seed; run k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// 2 runs × 100 epochs.
        #[arg(long)]
        smoke: bool,
    },
    /// Recompute summary.json from a results directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    All,
    Hgrail,
    RndGd,
    SGd,
}

impl VariantArg {
    fn variants(self, configured: &[Variant]) -> Vec<Variant> {
        match self {
            VariantArg::All => configured.to_vec(),
            VariantArg::Hgrail => vec![Variant::Hgrail],
            VariantArg::RndGd => vec![Variant::RndGd],
            VariantArg::SGd => vec![Variant::SGd],
        }
    }
}

fn run(cli: Command) -> Result<()> {
    match cli {
        Command::Run { config, variant, runs, epochs, seed, out, smoke } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if smoke {
                cfg = cfg.smoke();
            }
            cfg.variants = variant.variants(&cfg.variants);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.base_seed = seed.unwrap_or(cfg.base_seed);
            cfg.validate()?;

            let total = cfg.variants.len() * cfg.runs as usize;
            let finished = AtomicUsize::new(0);
            let start = Instant::now();
            eprintln!("running {total} runs of {} epochs", cfg.epochs);
            let bundle = run_experiment_with(&cfg, |r| {
                let n = finished.fetch_add(1, Ordering::Relaxed) + 1;
                eprintln!("[{n}/{total}] {} run {} (seed {}) done", r.variant, r.run, r.seed);
            })?;
            let summary = write_outputs(&bundle, &out)?;
            eprintln!("finished in {:.1} s; results in {}", start.elapsed().as_secs_f64(), out.display());
            render_summary(&summary, io::stdout().lock()).context("writing summary")?;
        }
        Command::Summarize { input } => {
            let summary = summarize_dir(&input)?;
            render_summary(&summary, io::stdout().lock()).context("writing summary")?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
