//! Configuration-driven experiments.

mod config;
mod runner;

pub use config::{
    validate, BaseConfig, CircleConfig, ExperimentConfig, ExperimentKind, FiberConfig, SweepConfig, TGrid, DEFAULT_BUDGET,
};
pub use runner::{draw_pattern, fmt_f64, quenched_case, run, singularity_case, QuenchedCase, RunSummary, SingularitySummary};

/// Name and one-line description of every experiment kind.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    ExperimentKind::ALL.iter().map(|k| (k.name(), k.description())).collect()
}
