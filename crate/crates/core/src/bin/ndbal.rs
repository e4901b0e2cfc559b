use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ndbal::harness::experiment::run_experiment_with_jobs;
use ndbal::harness::verify::run_quick_checks;
use ndbal::harness::{read_curves, ExperimentConfig};
use ndbal::learner::QueryMode;
use ndbal::NdbalError;

#[derive(Parser)]
#[command(name = "ndbal", version, about = "Diameter-based interactive structure discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Theory,
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves.csv and runs.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the lemma, SELECT, stopping, index and sampler checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON file for the outcomes.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the final round of a curves file.
    Report {
        /// Output directory of a run, or a curves CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: NdbalError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        NdbalError::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            mode,
            jobs,
        } => {
            let mut cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output = Some(o);
            }
            if let Some(m) = mode {
                cfg.ndbal.mode = match m {
                    Mode::Theory => QueryMode::Theory,
                    Mode::Heuristic => QueryMode::Heuristic,
                };
            }
            if let Err(e) = cfg.validate() {
                return fail(e);
            }
            if cfg.output.is_none() {
                return fail(NdbalError::config("output", "set `output` or pass --out"));
            }
            match run_experiment_with_jobs(&cfg, jobs) {
                Ok(out) => {
                    println!(
                        "{} runs, {} curve points written to {}",
                        out.records.len(),
                        out.curves.len(),
                        cfg.output.as_ref().expect("checked").display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { seed, out } => {
            let outcomes = run_quick_checks(seed);
            for o in &outcomes {
                println!("{}", o.line());
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&outcomes).expect("outcomes serialize");
                if let Err(e) = std::fs::write(&path, text) {
                    return fail(e.into());
                }
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::Report { out } => {
            let path = if out.is_dir() { out.join("curves.csv") } else { out };
            let points = match read_curves(&path) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let Some(last) = points.iter().map(|p| p.round).max() else {
                println!("no curve points");
                return ExitCode::SUCCESS;
            };
            println!("round {last}");
            println!("{:<12} {:<26} {:>10} {:>10} {:>10}", "algorithm", "metric", "mean", "ci_low", "ci_high");
            for p in points.iter().filter(|p| p.round == last) {
                println!(
                    "{:<12} {:<26} {:>10.4} {:>10.4} {:>10.4}",
                    p.algorithm, p.trial_agg, p.error_mean, p.ci_low, p.ci_high
                );
            }
            ExitCode::SUCCESS
        }
    }
}
