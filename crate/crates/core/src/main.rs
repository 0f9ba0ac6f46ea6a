use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hgan_core::checkpoint::Checkpoint;
use hgan_core::config::ExperimentConfig;
use hgan_core::defense::sweep_csv;
use hgan_core::training::Variant;
use hgan_core::{gradcheck, runner, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hgan", about = "Hybrid GAN training, mode-collapse evaluation and latent-projection defense")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run and write `{variant}-{seed}-{timestamp}/` under --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides training.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Score a checkpoint; writes eval.csv into --out.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation settings; defaults to the config stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Dump the first n generator draws (CSV for points, PGM for images).
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every variant over every seed, then aggregate.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "hgan,gan,autogan")]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Single-seed shorthand for --seeds.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Attack a fresh classifier and sweep the projection defense.
    Defend {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides defense.seeds with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Finite-difference check of every primitive and loss.
    Gradcheck,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            let t = runner::train(&cfg, &out)?;
            println!("{}", t.dir.display());
        }
        Command::Eval {
            checkpoint,
            config,
            seed,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => ck.config.clone(),
            };
            let seed = seed.unwrap_or(ck.config.training.seed);
            let report = runner::evaluate(&ck, &cfg, seed)?;
            let csv = runner::eval_csv(&[(ck.config.training.variant, seed, report)]);
            fs::create_dir_all(&out)?;
            fs::write(out.join("eval.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Sample { checkpoint, n, seed, out } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let seed = seed.unwrap_or(ck.config.training.seed);
            runner::sample(&ck, n, seed, &out)?;
        }
        Command::Compare {
            config,
            variants,
            seeds,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let seeds = seed.map_or(seeds, |s| vec![s]);
            let result = runner::compare(&cfg, &variants, &seeds, &out)?;
            print!("{}", runner::compare_csv(&result.summary));
        }
        Command::Defend {
            config,
            checkpoint,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.defense.seeds = vec![s];
            }
            let ck = Checkpoint::load(&checkpoint)?;
            let rows = runner::defend(&ck, &cfg)?;
            let csv = sweep_csv(&rows);
            fs::create_dir_all(&out)?;
            fs::write(out.join("defense.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Gradcheck => {
            let results = gradcheck::run_all();
            print!("{}", gradcheck::report(&results));
            return Ok(results.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let code: Error = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}
