use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use explemb::experiment::{self, config::ConfigFile, config::ExperimentConfig, gradcheck};
use explemb::metrics::MetricsReport;

#[derive(Parser)]
#[command(name = "explemb", about = "Embedding experiments with label and explanation guidance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured arm and write reports to the output directory
    Run {
        /// Path to the experiment config file
        config: PathBuf,
        /// Override the output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated arm names, overriding the config
        #[arg(long)]
        arms: Option<String>,
    },
    /// Generate a synthetic dataset as data.csv + schema.cfg
    Synth {
        /// Path to a synthetic spec config file
        spec: PathBuf,
        /// Output directory
        out: PathBuf,
    },
    /// Verify analytic gradients against finite differences
    Gradcheck {
        /// Seeded instances per loss
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Maximum allowed relative error
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Finite-difference step
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
    /// Re-render the table view of a previously written report.json
    Report {
        /// Experiment output directory
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool, explemb::Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            arms,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(arms) = arms {
                cfg.arms = arms
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
            }
            let summary = experiment::run_experiment(&cfg)?;
            print!("{}", summary.report.to_table());
            for (arm, err) in &summary.failed_arms {
                eprintln!("arm {arm} failed: {err}");
            }
            println!("wrote {}", summary.manifest_path.display());
            Ok(summary.failed_arms.is_empty())
        }
        Command::Synth { spec, out } => {
            let file = ConfigFile::load(&spec)?;
            let spec = explemb::experiment::config::synthetic_spec_from_file(&file)?;
            experiment::write_synthetic_csv(&spec, &out)?;
            println!("wrote {} and {}", out.join("data.csv").display(), out.join("schema.cfg").display());
            Ok(true)
        }
        Command::Gradcheck {
            instances,
            tolerance,
            step,
        } => {
            let report = gradcheck::run_gradcheck(instances, tolerance, step);
            let mut all_pass = true;
            for entry in &report {
                println!(
                    "{:<18} instances={} max_rel_err={:.3e} {}",
                    entry.loss,
                    entry.instances,
                    entry.max_relative_error,
                    if entry.pass { "pass" } else { "FAIL" }
                );
                all_pass &= entry.pass;
            }
            Ok(all_pass)
        }
        Command::Report { dir } => {
            let path = dir.join("report.json");
            let text = std::fs::read_to_string(&path)
                .map_err(|e| explemb::Error::io(path.display().to_string(), e))?;
            let report = MetricsReport::from_json(&text)?;
            print!("{}", report.to_table());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
