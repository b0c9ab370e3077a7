//! Executes an [`ExperimentConfig`] and writes CSV/JSON artifacts plus a manifest.
//!
//! Work items are keyed by `(seed, grid point)` and draw only from their own
//! random streams. Items may run on any worker, results are consumed in the
//! canonical item order, so the bytes written never depend on the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{validate, ExperimentConfig, ExperimentKind};
use crate::base::BaseProcess;
use crate::circle::{aperiodicity_probe, quenched_law_statistic, CircleLaw, PeriodicityReport};
use crate::error::{Error, Result};
use crate::fiber::{FiberMeasure, Pattern};
use crate::ledger::{compute_ledger, estimate_entropies, gap_schedule, steps_for, EntropyEstimates, ErrorLedger};
use crate::rng;
use crate::stats::{ks_to_exponential, median, trend_report, CurveReport, TrendReport};
use crate::survival::{annealed_survival, rescaled_steps, rescaled_survival, SurvivalCurve, DEFAULT_STEP_CAP};

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    /// Set when the budget stopped the sweep early; the message names the item.
    pub truncated: Option<String>,
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    kind: &'static str,
    config_sha256: String,
    code_version: &'static str,
    seeds: &'a [u64],
    truncated: Option<&'a str>,
    files: Vec<FileEntry>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, content: impl Into<Vec<u8>>) {
        self.files.push((name.into(), content.into()));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }
}

fn is_budget_error(e: &Error) -> bool {
    matches!(e, Error::ResourceLimit(_) | Error::BudgetExceeded(_))
}

/// Splits item results at the first budget failure; other errors abort.
fn take_until_budget<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, Option<String>)> {
    let mut done = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => done.push(v),
            Err(e) if is_budget_error(&e) => return Ok((done, Some(e.to_string()))),
            Err(e) => return Err(e),
        }
    }
    Ok((done, None))
}

fn truncation_line(csv: &mut String, msg: &Option<String>) {
    if let Some(m) = msg {
        let _ = writeln!(csv, "# truncated: {m}");
    }
}

/// Target word for `(seed, n)`: the configured one, or a draw from the marginal.
pub fn draw_pattern(fm: &FiberMeasure, proc: &BaseProcess, n: usize, seed: u64) -> Result<Pattern> {
    let mut r = rng::item_stream(seed, n as u64, rng::lanes::PATTERN);
    fm.sample_marginal_pattern(proc, n, &mut r)
}

fn check_curve_cost(n: usize, b: usize, k_max: usize, copies: usize, t_max: f64, budget: u64) -> Result<()> {
    let cost = k_max as u128 * n as u128 * b as u128 * copies as u128;
    if cost > budget as u128 {
        return Err(Error::ResourceLimit(format!(
            "survival at n = {n}, t = {t_max} needs about {cost} operations (budget {budget})"
        )));
    }
    Ok(())
}

/// One exact rescaled curve and its distance to `e^{-t}`.
#[derive(Debug, Clone, Serialize)]
pub struct QuenchedCase {
    pub n: usize,
    pub seed: u64,
    pub pattern: String,
    pub measure: f64,
    #[serde(skip)]
    pub curve: SurvivalCurve,
    pub report: CurveReport,
}

/// Base window `seed`, target from [`draw_pattern`] unless `fixed` is given.
pub fn quenched_case(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    n: usize,
    seed: u64,
    t_grid: &[f64],
    budget: u64,
    fixed: Option<&Pattern>,
) -> Result<QuenchedCase> {
    let pat = match fixed {
        Some(p) => p.clone(),
        None => draw_pattern(fm, proc, n, seed)?,
    };
    let n = pat.len();
    let measure = fm.marginal_cylinder_measure(proc, &pat)?;
    let k_grid = rescaled_steps(measure, t_grid, DEFAULT_STEP_CAP)?;
    check_curve_cost(n, fm.fiber_alphabet_size(), *k_grid.iter().max().unwrap(), 1, t_grid[t_grid.len() - 1], budget)?;
    let mut window = proc.sample_window(seed, 1)?;
    let curve = rescaled_survival(fm, proc, &mut window, &pat, t_grid, DEFAULT_STEP_CAP)?;
    let report = ks_to_exponential(&curve.values, t_grid)?;
    Ok(QuenchedCase { n, seed, pattern: pat.to_string(), measure, curve, report })
}

/// Summary of `|ln density ratio|` over independent `(ω, x)` draws.
#[derive(Debug, Clone, Serialize)]
pub struct SingularitySummary {
    pub n: usize,
    pub seed: u64,
    pub draws: usize,
    pub threshold: f64,
    pub fraction_beyond: f64,
    /// `P(|ln ratio| ≥ threshold)` with the match count `Binomial(n, 1/2)`.
    pub exact_fraction: f64,
    pub mean_log_ratio: f64,
    #[serde(skip)]
    pub rows: Vec<(usize, usize, f64)>,
}

fn ln_binomial_pmf(n: usize, k: usize) -> f64 {
    let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k) - n as f64 * std::f64::consts::LN_2
}

/// `draws` base windows and fiber words of length `n`, drawn independently;
/// draw `d` uses the window and pattern lanes of item `d`.
pub fn singularity_case(fm: &FiberMeasure, proc: &BaseProcess, n: usize, draws: usize, seed: u64, threshold: f64) -> Result<SingularitySummary> {
    let rows = (0..draws)
        .into_par_iter()
        .map(|d| {
            let window = proc.sample_window_from(rng::item_stream(seed, d as u64, rng::lanes::WINDOW), n)?;
            let mut r = rng::item_stream(seed, d as u64, rng::lanes::PATTERN);
            let x = fm.sample_marginal_pattern(proc, n, &mut r)?;
            let dr = fm.density_ratio(proc, &window, &x)?;
            Ok((d, dr.matches, dr.log_ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    let beyond = rows.iter().filter(|r| r.2.abs() >= threshold).count();
    let p = fm.matrix()[0][0];
    let q = fm.matrix()[0][1];
    let exact_fraction = (0..=n)
        .filter(|&k| (k as f64 * p.ln() + (n - k) as f64 * q.ln() + n as f64 * std::f64::consts::LN_2).abs() >= threshold)
        .map(|k| ln_binomial_pmf(n, k).exp())
        .sum();
    Ok(SingularitySummary {
        n,
        seed,
        draws,
        threshold,
        fraction_beyond: beyond as f64 / draws.max(1) as f64,
        exact_fraction,
        mean_log_ratio: rows.iter().map(|r| r.2).sum::<f64>() / draws.max(1) as f64,
        rows,
    })
}

/// Checks `cfg` and runs it into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let threads = cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut art = Artifacts { dir: out.to_path_buf(), files: Vec::new() };
    let truncated = pool.install(|| match cfg.kind {
        ExperimentKind::QuenchedShift => run_quenched(cfg, &mut art),
        ExperimentKind::AnnealedShift => run_annealed(cfg, &mut art),
        ExperimentKind::Ledger => run_ledger(cfg, &mut art),
        ExperimentKind::Entropy => run_entropy(cfg, &mut art),
        ExperimentKind::CircleLaw => run_circle(cfg, &mut art),
        ExperimentKind::Singularity => run_singularity(cfg, &mut art),
    })?;
    write_all(cfg, art, truncated)
}

fn write_all(cfg: &ExperimentConfig, art: Artifacts, truncated: Option<String>) -> Result<RunSummary> {
    std::fs::create_dir_all(&art.dir).map_err(|e| Error::Io(format!("{}: {e}", art.dir.display())))?;
    let mut entries = Vec::new();
    let mut names = Vec::new();
    for (name, bytes) in &art.files {
        let path = art.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        entries.push(FileEntry { name: name.clone(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
        names.push(name.clone());
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest {
        kind: cfg.kind.name(),
        config_sha256: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION"),
        seeds: &cfg.seeds,
        truncated: truncated.as_deref(),
        files: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(art.dir.join("manifest.json"), text)?;
    names.push("manifest.json".to_string());
    Ok(RunSummary { out_dir: art.dir, files: names, truncated })
}

fn shift_model(cfg: &ExperimentConfig) -> Result<(FiberMeasure, BaseProcess, Option<Pattern>)> {
    let fm = cfg.fiber_measure()?;
    let proc = cfg.base.build()?;
    fm.check_compatible(&proc)?;
    let fixed = match cfg.fiber.as_ref().and_then(|f| f.pattern.as_ref()) {
        Some(p) => Some(Pattern::parse(p, fm.fiber_alphabet_size())?),
        None => None,
    };
    Ok((fm, proc, fixed))
}

fn n_values(cfg: &ExperimentConfig, fixed: &Option<Pattern>) -> Vec<usize> {
    match fixed {
        Some(p) => vec![p.len()],
        None => cfg.sweep.n.clone(),
    }
}

#[derive(Serialize)]
struct PerN {
    n: usize,
    median_sup_abs_err: f64,
    fraction_below_0_05: f64,
}

fn per_n_summary(ns: &[usize], cases: &[(usize, f64)]) -> Vec<PerN> {
    ns.iter()
        .filter_map(|&n| {
            let errs: Vec<f64> = cases.iter().filter(|c| c.0 == n).map(|c| c.1).collect();
            (!errs.is_empty()).then(|| PerN {
                n,
                median_sup_abs_err: median(&errs),
                fraction_below_0_05: errs.iter().filter(|&&e| e < 0.05).count() as f64 / errs.len() as f64,
            })
        })
        .collect()
}

fn trend_over_n(per_n: &[PerN]) -> Option<TrendReport> {
    let xs: Vec<f64> = per_n.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = per_n.iter().map(|p| p.median_sup_abs_err).collect();
    trend_report(&xs, &ys).ok()
}

fn curve_csv(t_grid: &[f64], k_grid: &[usize], values: &[f64], stderr: Option<&[f64]>) -> String {
    let mut s = String::from(if stderr.is_some() { "t,k,survival,exp_minus_t,abs_err,stderr\n" } else { "t,k,survival,exp_minus_t,abs_err\n" });
    for i in 0..t_grid.len() {
        let e = (-t_grid[i]).exp();
        let _ = write!(s, "{},{},{},{},{}", fmt_f64(t_grid[i]), k_grid[i], fmt_f64(values[i]), fmt_f64(e), fmt_f64((values[i] - e).abs()));
        if let Some(se) = stderr {
            let _ = write!(s, ",{}", fmt_f64(se[i]));
        }
        s.push('\n');
    }
    s
}

fn run_quenched(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let (fm, proc, fixed) = shift_model(cfg)?;
    let t = cfg.t_values();
    let ns = n_values(cfg, &fixed);
    let items: Vec<(usize, u64)> = ns.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let results: Vec<Result<QuenchedCase>> = items
        .par_iter()
        .map(|&(n, seed)| quenched_case(&fm, &proc, n, seed, &t, cfg.budget, fixed.as_ref()))
        .collect();
    let (cases, truncated) = take_until_budget(results)?;
    for (i, c) in cases.iter().enumerate() {
        let mut csv = curve_csv(&t, &c.curve.k_grid, &c.curve.values, None);
        if i + 1 == cases.len() {
            truncation_line(&mut csv, &truncated);
        }
        art.add(format!("quenched_n{}_seed{}.csv", c.n, c.seed), csv);
    }
    let per_n = per_n_summary(&ns, &cases.iter().map(|c| (c.n, c.report.sup_abs_err)).collect::<Vec<_>>());
    #[derive(Serialize)]
    struct Report<'a> {
        t_grid: &'a [f64],
        cases: &'a [QuenchedCase],
        per_n: Vec<PerN>,
        trend: Option<TrendReport>,
        truncated: Option<&'a str>,
    }
    let trend = trend_over_n(&per_n);
    art.add_json("quenched_report.json", &Report { t_grid: &t, cases: &cases, per_n, trend, truncated: truncated.as_deref() })?;
    Ok(truncated)
}

fn run_annealed(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let (fm, proc, fixed) = shift_model(cfg)?;
    let t = cfg.t_values();
    let ns = n_values(cfg, &fixed);
    #[derive(Serialize)]
    struct Case {
        n: usize,
        seed: u64,
        pattern: String,
        windows: usize,
        report: CurveReport,
        #[serde(skip)]
        k_grid: Vec<usize>,
    }
    let mut results = Vec::new();
    for &n in &ns {
        for &seed in &cfg.seeds {
            let r = (|| {
                let pat = match &fixed {
                    Some(p) => p.clone(),
                    None => draw_pattern(&fm, &proc, n, seed)?,
                };
                let measure = fm.marginal_cylinder_measure(&proc, &pat)?;
                let k_grid = rescaled_steps(measure, &t, DEFAULT_STEP_CAP)?;
                let k_max = *k_grid.iter().max().unwrap();
                check_curve_cost(pat.len(), fm.fiber_alphabet_size(), k_max, cfg.sweep.windows, t[t.len() - 1], cfg.budget)?;
                let a = annealed_survival(&fm, &proc, &pat, &t, cfg.sweep.windows, seed, DEFAULT_STEP_CAP)?;
                let report = ks_to_exponential(&a.mean, &t)?.with_stderr(a.stderr.clone());
                Ok(Case { n: pat.len(), seed, pattern: pat.to_string(), windows: a.n_windows, report, k_grid: a.k_grid })
            })();
            let stop = matches!(&r, Err(e) if is_budget_error(e));
            results.push(r);
            if stop {
                break;
            }
        }
    }
    let (cases, truncated) = take_until_budget(results)?;
    for (i, c) in cases.iter().enumerate() {
        let mut csv = curve_csv(&t, &c.k_grid, &c.report.observed, c.report.stderr.as_deref());
        if i + 1 == cases.len() {
            truncation_line(&mut csv, &truncated);
        }
        art.add(format!("annealed_n{}_seed{}.csv", c.n, c.seed), csv);
    }
    #[derive(Serialize)]
    struct Report<'a> {
        cases: &'a [Case],
        truncated: Option<&'a str>,
    }
    art.add_json("annealed_report.json", &Report { cases: &cases, truncated: truncated.as_deref() })?;
    Ok(truncated)
}

fn run_ledger(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let (fm, proc, fixed) = shift_model(cfg)?;
    let t = cfg.t_values();
    let ns = n_values(cfg, &fixed);
    let mut rows: Vec<(u64, ErrorLedger)> = Vec::new();
    let mut truncated = None;
    'outer: for &seed in &cfg.seeds {
        for &n in &ns {
            let pat = match &fixed {
                Some(p) => p.clone(),
                None => draw_pattern(&fm, &proc, n, seed)?,
            };
            let measure = fm.marginal_cylinder_measure(&proc, &pat)?;
            for &tv in &t {
                let k = steps_for(measure, tv)?;
                let gap = cfg.sweep.gap.unwrap_or_else(|| gap_schedule(pat.len(), fm.h0())).min(k).max(1);
                let mut window = proc.sample_window(seed, 1)?;
                match compute_ledger(&fm, &proc, &mut window, &pat, tv, gap, cfg.sweep.jmax, cfg.budget) {
                    Ok(l) => rows.push((seed, l)),
                    Err(e) if is_budget_error(&e) => {
                        truncated = Some(e.to_string());
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let mut csv = String::from("seed,n,t,g,k,M,G,H,K,delta_sum,lemma_lhs,lemma_rhs,sandwich_gap\n");
    for (seed, l) in &rows {
        let _ = writeln!(
            csv,
            "{seed},{},{},{},{},{},{},{},{},{},{},{},{}",
            l.n,
            fmt_f64(l.t),
            l.gap,
            l.k,
            fmt_f64(l.m),
            fmt_f64(l.g),
            fmt_f64(l.h),
            fmt_f64(l.k_term),
            fmt_f64(l.delta_sum),
            fmt_f64(l.lemma_lhs),
            fmt_f64(l.lemma_rhs),
            fmt_f64(l.sandwich_gap)
        );
    }
    truncation_line(&mut csv, &truncated);
    art.add("ledger.csv", csv);
    #[derive(Serialize)]
    struct Row<'a> {
        seed: u64,
        #[serde(flatten)]
        ledger: &'a ErrorLedger,
        decomposition_holds: bool,
        lemma_holds: bool,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        rows: Vec<Row<'a>>,
        truncated: Option<&'a str>,
    }
    let report = Report {
        rows: rows
            .iter()
            .map(|(seed, l)| Row { seed: *seed, ledger: l, decomposition_holds: l.decomposition_holds(), lemma_holds: l.lemma_holds() })
            .collect(),
        truncated: truncated.as_deref(),
    };
    art.add_json("ledger_report.json", &report)?;
    Ok(truncated)
}

fn run_entropy(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let (fm, proc, _) = shift_model(cfg)?;
    let mut all: Vec<(u64, EntropyEstimates)> = Vec::new();
    for &seed in &cfg.seeds {
        let e = estimate_entropies(&fm, &proc, &cfg.sweep.n, cfg.sweep.samples, seed)?;
        let mut csv = String::from("n,smb_mean,smb_stderr,ow_mean,ow_stderr,ow_censored,samples\n");
        for (s, o) in e.smb.iter().zip(&e.ow) {
            let _ = writeln!(csv, "{},{},{},{},{},{},{}", s.n, fmt_f64(s.mean), fmt_f64(s.stderr), fmt_f64(o.mean), fmt_f64(o.stderr), o.censored, o.samples);
        }
        art.add(format!("entropy_seed{seed}.csv"), csv);
        all.push((seed, e));
    }
    #[derive(Serialize)]
    struct Case<'a> {
        seed: u64,
        #[serde(flatten)]
        estimates: &'a EntropyEstimates,
    }
    let cases: Vec<Case> = all.iter().map(|(seed, e)| Case { seed: *seed, estimates: e }).collect();
    art.add_json("entropy_report.json", &cases)?;
    Ok(None)
}

fn run_circle(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let rds = cfg.circle_rds()?;
    let t = cfg.t_values();
    let fixed_y = cfg.circle.as_ref().and_then(|c| c.y);
    let mut laws: Vec<(u64, CircleLaw)> = Vec::new();
    let mut truncated = None;
    'outer: for &seed in &cfg.seeds {
        for (ri, &r) in cfg.sweep.r.iter().enumerate() {
            let y = fixed_y.unwrap_or_else(|| rng::item_stream(seed, ri as u64, rng::lanes::PATTERN).gen::<f64>());
            let mut window = rds.base().sample_window(seed, 1)?;
            match quenched_law_statistic(&rds, &mut window, y, r, &t, cfg.sweep.trials, seed) {
                Ok(l) => laws.push((seed, l)),
                Err(e) if is_budget_error(&e) => {
                    truncated = Some(e.to_string());
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut csv = String::from("seed,r,y,t,k,empirical_survival,exp_minus_t,delta_r,trials,censored_count\n");
    for (seed, l) in &laws {
        for i in 0..l.t_grid.len() {
            let _ = writeln!(
                csv,
                "{seed},{},{},{},{},{},{},{},{},{}",
                fmt_f64(l.r),
                fmt_f64(l.y),
                fmt_f64(l.t_grid[i]),
                l.k_grid[i],
                fmt_f64(l.survival[i]),
                fmt_f64((-l.t_grid[i]).exp()),
                fmt_f64(l.delta_r),
                l.trials,
                l.censored
            );
        }
    }
    truncation_line(&mut csv, &truncated);
    art.add("circle_law.csv", csv);

    #[derive(Serialize)]
    struct PerR {
        r: f64,
        median_delta_r: f64,
        fraction_below_0_05: f64,
    }
    let per_r: Vec<PerR> = cfg
        .sweep
        .r
        .iter()
        .filter_map(|&r| {
            let ds: Vec<f64> = laws.iter().filter(|l| l.1.r == r).map(|l| l.1.delta_r).collect();
            (!ds.is_empty()).then(|| PerR {
                r,
                median_delta_r: median(&ds),
                fraction_below_0_05: ds.iter().filter(|&&d| d < 0.05).count() as f64 / ds.len() as f64,
            })
        })
        .collect();
    let mut by_r: Vec<&PerR> = per_r.iter().collect();
    by_r.sort_by(|a, b| b.r.total_cmp(&a.r));
    let trend = trend_report(
        &by_r.iter().map(|p| -p.r.log10()).collect::<Vec<_>>(),
        &by_r.iter().map(|p| p.median_delta_r).collect::<Vec<_>>(),
    )
    .ok();
    let periodicity: Option<PeriodicityReport> = if cfg.sweep.period_horizon > 0 {
        let seed = cfg.seeds[0];
        let mut window = rds.base().sample_window(seed, cfg.sweep.period_horizon)?;
        window.extend_to(cfg.sweep.period_horizon);
        Some(aperiodicity_probe(&rds, window.symbols(), cfg.sweep.trials, cfg.sweep.period_horizon, seed)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct Report<'a> {
        assumption: &'static str,
        multipliers: [u64; 2],
        cases: Vec<&'a CircleLaw>,
        per_r: Vec<PerR>,
        trend_over_decreasing_r: Option<TrendReport>,
        periodicity: Option<PeriodicityReport>,
        truncated: Option<&'a str>,
    }
    art.add_json(
        "circle_report.json",
        &Report {
            assumption: "sample measures are Lebesgue for every base word; exponential decay of correlations for Lipschitz observables is taken from the classical theory of expanding circle maps",
            multipliers: rds.multipliers(),
            cases: laws.iter().map(|l| &l.1).collect(),
            per_r,
            trend_over_decreasing_r: trend,
            periodicity,
            truncated: truncated.as_deref(),
        },
    )?;
    Ok(truncated)
}

fn run_singularity(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Option<String>> {
    let (fm, proc, _) = shift_model(cfg)?;
    let mut csv = String::from("seed,n,draw,matches,log_ratio\n");
    let mut summaries = Vec::new();
    for &seed in &cfg.seeds {
        for &n in &cfg.sweep.n {
            let s = singularity_case(&fm, &proc, n, cfg.sweep.trials, seed, cfg.sweep.threshold)?;
            for (d, m, lr) in &s.rows {
                let _ = writeln!(csv, "{seed},{n},{d},{m},{}", fmt_f64(*lr));
            }
            summaries.push(s);
        }
    }
    art.add("singularity.csv", csv);
    art.add_json("singularity_report.json", &summaries)?;
    Ok(None)
}
