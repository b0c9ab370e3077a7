use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hitlab::expt::{list_experiments, run, validate, ExperimentConfig};
use hitlab::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "hitlab", version, about = "Hitting-time experiments for random subshifts and random circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Run with this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and print its violations as JSON.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the experiment kinds.
    ListExperiments,
}

fn print_violations(violations: &[String]) {
    println!("{}", serde_json::json!({ "violations": violations }));
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        let code = if matches!(e, Error::Io(_)) { EXIT_INTERNAL } else { EXIT_VALIDATION };
        print_violations(&[e.to_string()]);
        ExitCode::from(code)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for (name, desc) in list_experiments() {
                println!("{name:<16} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let v = validate(&cfg);
            print_violations(&v);
            if v.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Command::Run { config, out, threads, seed } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(t) = threads {
                cfg.threads = Some(t);
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let v = validate(&cfg);
            if !v.is_empty() {
                print_violations(&v);
                return ExitCode::from(EXIT_VALIDATION);
            }
            let dir = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.name()));
            match run(&cfg, &dir) {
                Ok(summary) => {
                    for f in &summary.files {
                        println!("{}", summary.out_dir.join(f).display());
                    }
                    match summary.truncated {
                        Some(msg) => {
                            eprintln!("truncated: {msg}");
                            ExitCode::from(EXIT_BUDGET)
                        }
                        None => ExitCode::SUCCESS,
                    }
                }
                Err(e @ (Error::ResourceLimit(_) | Error::BudgetExceeded(_))) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_BUDGET)
                }
                Err(e @ Error::Config(_)) => {
                    print_violations(&[e.to_string()]);
                    ExitCode::from(EXIT_VALIDATION)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_INTERNAL)
                }
            }
        }
    }
}
