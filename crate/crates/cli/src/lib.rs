//! Command-line pipeline for voxel-based lesion-symptom mapping with
//! permutation-based cluster-size and max-t correction.
//!
//! ```text
//! vlsm synth    --config desk.json --out cohort/
//! vlsm run      --config desk.json --cohort cohort/ --out results/
//! vlsm evaluate --run results/ --ground-truth cohort/ground_truth.json
//! ```

pub mod config;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod manifest;
pub mod run;
pub mod synth;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::ModeSelection;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vlsm", version, about = "Voxel-based lesion-symptom mapping with permutation correction")]
pub struct Cli {
    /// Worker threads for permutations [default: available cores]. Output
    /// does not depend on this.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort from the `synth` section of a config.
    Synth {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides `synth.seed`.
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
    },
    /// Run the analysis on a cohort directory.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Directory with scores.csv and masks/.
        #[arg(long, value_name = "DIR")]
        cohort: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides `analysis.master_seed`.
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
        /// Null construction; overrides `analysis.mode`. all-clusters is
        /// demonstration only: it does not control the family-wise error rate.
        #[arg(long, value_enum)]
        mode: Option<ModeSelection>,
    },
    /// Summarize a run: false-positive rates, threshold curve, recovery.
    Evaluate {
        /// Output directory of `vlsm run`.
        #[arg(long = "run", value_name = "DIR")]
        run_dir: PathBuf,
        /// ground_truth.json of a synthetic cohort; without it only the null
        /// calibration is reported.
        #[arg(long, value_name = "PATH")]
        ground_truth: Option<PathBuf>,
        /// Where to write the report [default: the run directory].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the tool version.
    Version,
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Synth { config, out, seed } => {
            let (cohort, _) = synth::cmd_synth(&synth::SynthArgs { config, out: out.clone(), seed })?;
            println!("wrote {} subjects to {}", cohort.len(), out.display());
        }
        Command::Run { config, cohort, out, seed, mode } => {
            let result = run::cmd_run(&run::RunArgs { config, cohort, out: out.clone(), seed, mode })?;
            let s = &result.summary;
            println!(
                "{} analyzable voxels, {} permutations, FWER t > {:.4} ({} voxels); results in {}",
                s.analyzable_voxels,
                s.n_permutations,
                s.fwer_t_threshold,
                s.fwer_voxels,
                out.display()
            );
        }
        Command::Evaluate { run_dir, ground_truth, out } => {
            evaluate::cmd_evaluate(&evaluate::EvaluateArgs { run_dir, ground_truth, out })?;
        }
        Command::Version => println!("vlsm {}", manifest::TOOL_VERSION),
    }
    Ok(())
}

/// Runs a parsed command line on a pool of the requested size.
pub fn execute(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}
