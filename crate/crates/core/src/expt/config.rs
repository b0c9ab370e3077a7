//! Experiment configuration files (TOML) and their validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base::BaseProcess;
use crate::circle::{bits_for_horizon, CircleRDS};
use crate::error::{Error, Result};
use crate::fiber::{FiberMeasure, Pattern};
use crate::stats::{default_t_grid, uniform_grid};

pub const DEFAULT_BUDGET: u64 = 20_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    QuenchedShift,
    AnnealedShift,
    Ledger,
    Entropy,
    CircleLaw,
    Singularity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::QuenchedShift,
        ExperimentKind::AnnealedShift,
        ExperimentKind::Ledger,
        ExperimentKind::Entropy,
        ExperimentKind::CircleLaw,
        ExperimentKind::Singularity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::QuenchedShift => "quenched_shift",
            ExperimentKind::AnnealedShift => "annealed_shift",
            ExperimentKind::Ledger => "ledger",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::CircleLaw => "circle_law",
            ExperimentKind::Singularity => "singularity",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::QuenchedShift => "exact rescaled survival of a random cylinder for fixed base windows, per (n, seed)",
            ExperimentKind::AnnealedShift => "rescaled survival averaged over independent base windows, with standard errors",
            ExperimentKind::Ledger => "error decomposition k, M, G, H, K, delta and the two product-bound checks",
            ExperimentKind::Entropy => "cylinder-decay and return-time entropy slopes over a range of n",
            ExperimentKind::CircleLaw => "Monte Carlo hitting-time law for random x2/x3 circle maps and Delta_r",
            ExperimentKind::Singularity => "dispersion of the log density ratio of sample and marginal measures",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseConfig {
    Bernoulli { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>> },
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig::Bernoulli { weights: vec![0.5, 0.5] }
    }
}

impl BaseConfig {
    pub fn build(&self) -> Result<BaseProcess> {
        match self {
            BaseConfig::Bernoulli { weights } => BaseProcess::bernoulli(weights.clone()),
            BaseConfig::Markov { transition } => BaseProcess::markov(transition.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub w: Vec<Vec<f64>>,
    /// Fixed target word; when absent each seed draws one from the marginal.
    #[serde(default)]
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleConfig {
    #[serde(default = "default_multipliers")]
    pub multipliers: [u64; 2],
    /// Fixed ball center; when absent each (seed, r) draws a uniform one.
    #[serde(default)]
    pub y: Option<f64>,
    /// Precision to check against the horizon; computed when absent.
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

fn default_multipliers() -> [u64; 2] {
    [2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid::List(default_t_grid())
    }
}

impl TGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TGrid::List(v) => v.clone(),
            TGrid::Range { start, stop, step } => {
                if *step > 0.0 && stop >= start {
                    uniform_grid(*start, *stop, *step)
                } else {
                    Vec::new()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub t: TGrid,
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_windows")]
    pub windows: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Ledger gap; defaults to the entropy schedule `⌊e^{h0 n/4}⌋`.
    #[serde(default)]
    pub gap: Option<usize>,
    #[serde(default)]
    pub jmax: Option<usize>,
    /// Singularity threshold on `|ln ratio|`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Aperiodicity probe horizon for circle runs (0 disables the probe).
    #[serde(default)]
    pub period_horizon: usize,
}

fn default_trials() -> usize {
    10_000
}

fn default_windows() -> usize {
    200
}

fn default_samples() -> usize {
    200
}

fn default_threshold() -> f64 {
    10.0
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: Vec::new(),
            t: TGrid::default(),
            r: Vec::new(),
            trials: default_trials(),
            windows: default_windows(),
            samples: default_samples(),
            gap: None,
            jmax: None,
            threshold: default_threshold(),
            period_horizon: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    /// Worker threads; defaults to the available cores. Never affects outputs.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub fiber: Option<FiberConfig>,
    #[serde(default)]
    pub circle: Option<CircleConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring `threads` and `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.sweep.t.values()
    }

    pub fn fiber_measure(&self) -> Result<FiberMeasure> {
        let f = self.fiber.as_ref().ok_or_else(|| Error::Config("missing [fiber] section".into()))?;
        FiberMeasure::new(f.w.clone())
    }

    pub fn circle_rds(&self) -> Result<CircleRDS> {
        let m = self.circle.as_ref().map_or(default_multipliers(), |c| c.multipliers);
        CircleRDS::new(m[0], m[1], self.base.build()?)
    }

    /// Longest orbit a circle run follows: `⌊t_max / (2 r_min)⌋`.
    pub fn circle_horizon(&self) -> usize {
        let t_max = self.t_values().into_iter().fold(0.0, f64::max);
        let r_min = self.sweep.r.iter().copied().fold(f64::INFINITY, f64::min);
        if !r_min.is_finite() || r_min <= 0.0 {
            return 0;
        }
        ((t_max / (2.0 * r_min)).floor() as usize).max(self.sweep.period_horizon)
    }
}

fn check_matrix(w: &[Vec<f64>], label: &str, out: &mut Vec<String>) {
    if w.is_empty() {
        out.push(format!("{label} has no rows"));
        return;
    }
    let b = w[0].len();
    for (i, row) in w.iter().enumerate() {
        if row.len() != b {
            out.push(format!("{label} row {i} has length {} (expected {b})", row.len()));
        }
        for (j, x) in row.iter().enumerate() {
            if !(*x > 0.0 && *x < 1.0) {
                out.push(format!("{label}[{i}][{j}] = {x} not in (0,1)"));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            out.push(format!("row {i} not stochastic (sums to {sum})"));
        }
    }
}

/// All problems with `cfg`; empty when it can be run.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    if cfg.seeds.is_empty() {
        v.push("seeds must list at least one seed".to_string());
    }
    if cfg.budget == 0 {
        v.push("budget must be positive".to_string());
    }
    if cfg.threads == Some(0) {
        v.push("threads must be positive".to_string());
    }

    let base = match &cfg.base {
        BaseConfig::Bernoulli { weights } => {
            if weights.len() < 2 {
                v.push("base weights need at least 2 symbols".to_string());
            }
            for (i, x) in weights.iter().enumerate() {
                if !(*x > 0.0 && *x < 1.0) {
                    v.push(format!("base weight {i} = {x} not in (0,1)"));
                }
            }
            if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                v.push("base weights do not sum to 1".to_string());
            }
            cfg.base.build().ok()
        }
        BaseConfig::Markov { transition } => {
            check_matrix(transition, "base transition", &mut v);
            if transition.iter().any(|r| r.len() != transition.len()) {
                v.push("base transition matrix must be square".to_string());
            }
            let built = cfg.base.build();
            if let (Err(e), true) = (&built, v.is_empty()) {
                v.push(e.to_string());
            }
            built.ok()
        }
    };

    let t = cfg.t_values();
    if t.is_empty() {
        v.push("t grid is empty".to_string());
    }
    if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        v.push("t values must be finite and nonnegative".to_string());
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        v.push("t grid must be strictly increasing".to_string());
    }

    let shift = !matches!(cfg.kind, ExperimentKind::CircleLaw);
    if shift {
        match &cfg.fiber {
            None => v.push("missing [fiber] section".to_string()),
            Some(f) => {
                check_matrix(&f.w, "W", &mut v);
                if let Some(base) = &base {
                    if f.w.len() != base.alphabet_size() {
                        v.push(format!("W has {} rows but the base alphabet has {} symbols", f.w.len(), base.alphabet_size()));
                    }
                }
                if let Some(p) = &f.pattern {
                    let b = f.w.first().map_or(0, Vec::len);
                    if let Err(e) = Pattern::parse(p, b) {
                        v.push(format!("pattern: {e}"));
                    }
                }
            }
        }
        if cfg.sweep.n.is_empty() && cfg.fiber.as_ref().and_then(|f| f.pattern.as_ref()).is_none() {
            v.push("sweep.n is empty".to_string());
        }
        if cfg.sweep.n.contains(&0) {
            v.push("sweep.n values must be at least 1".to_string());
        }
    }

    match cfg.kind {
        ExperimentKind::AnnealedShift if cfg.sweep.windows == 0 => v.push("sweep.windows must be at least 1".to_string()),
        ExperimentKind::Entropy if cfg.sweep.samples == 0 => v.push("sweep.samples must be at least 1".to_string()),
        ExperimentKind::Singularity if cfg.sweep.trials == 0 => v.push("sweep.trials must be at least 1".to_string()),
        ExperimentKind::Ledger => {
            if t.iter().any(|x| *x <= 0.0) {
                v.push("ledger t values must be positive".to_string());
            }
            if cfg.sweep.gap == Some(0) {
                v.push("sweep.gap must be at least 1".to_string());
            }
        }
        ExperimentKind::Singularity => {
            if let Some(f) = &cfg.fiber {
                let symmetric = f.w.len() == 2 && f.w.iter().all(|r| r.len() == 2) && (f.w[0][0] - f.w[1][1]).abs() < 1e-12;
                if !symmetric {
                    v.push("singularity needs a symmetric 2x2 W".to_string());
                }
            }
            if !matches!(&cfg.base, BaseConfig::Bernoulli { weights } if weights.len() == 2 && (weights[0] - 0.5).abs() < 1e-12) {
                v.push("singularity needs a fair-coin base".to_string());
            }
        }
        ExperimentKind::CircleLaw => {
            if cfg.sweep.r.is_empty() {
                v.push("sweep.r is empty".to_string());
            }
            if cfg.sweep.r.iter().any(|r| !(*r > 0.0 && *r < 0.5)) {
                v.push("sweep.r values must lie in (0, 1/2)".to_string());
            }
            if cfg.sweep.trials < 100 {
                v.push("sweep.trials must be at least 100 for circle runs".to_string());
            }
            if base.as_ref().is_some_and(|b| b.alphabet_size() != 2) {
                v.push("circle base must be over {0,1}".to_string());
            }
            let c = cfg.circle.clone().unwrap_or(CircleConfig { multipliers: default_multipliers(), y: None, precision_bits: None });
            if c.multipliers.iter().any(|&m| m < 2) {
                v.push("circle multipliers must be at least 2".to_string());
            }
            if let Some(y) = c.y {
                if !(0.0..1.0).contains(&y) {
                    v.push(format!("circle.y = {y} outside [0,1)"));
                }
            }
            if let Some(bits) = c.precision_bits {
                let horizon = cfg.circle_horizon();
                let m = c.multipliers[0].max(c.multipliers[1]).max(2);
                let need = bits_for_horizon(horizon, m);
                if bits < need {
                    v.push(format!("circle horizon of {horizon} steps needs {need} bits of precision, {bits} configured"));
                }
            }
        }
        _ => {}
    }
    v
}
