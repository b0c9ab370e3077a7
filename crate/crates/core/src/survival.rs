//! Quenched survival probabilities `μ_ω(τ_A > k)` for cylinder targets.
//!
//! For `A = C^n(y)` and a product measure whose coordinate laws change with
//! time, the probability that `y` does not start at any of the positions
//! `1..=k` is propagated exactly over the states of a [`PatternAutomaton`],
//! discarding the mass that reaches the accepting state. Cost is
//! `O(k * n * b)` per curve.
//!
//! Occurrences are counted as pattern *starts* at positions `>= 1`, so an
//! occurrence at position 0 does not count as a hit; it does define the
//! return-time event `A ∩ {τ_A > j}`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::automaton::PatternAutomaton;
use crate::base::{BaseProcess, BaseWindow};
use crate::compensated::{self, NeumaierSum};
use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberMeasure, FiberSampler, Pattern};
use crate::rng;

/// Default bound on `k_{A,t}` for rescaled curves.
pub const DEFAULT_STEP_CAP: usize = 1 << 28;

/// Where a curve came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveMeta {
    pub pattern: String,
    /// `start_index` of the base window the curve was computed on.
    pub window_start: usize,
    pub offset: usize,
}

/// Values of `μ_ω(τ_A > k)` (or a related survival quantity) on a grid of `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub k_grid: Vec<usize>,
    pub values: Vec<f64>,
    /// Rescaled times `t` with `k = ⌊t / μ(A)⌋`, when the curve is a rescaled view.
    pub t_grid: Option<Vec<f64>>,
    pub meta: CurveMeta,
}

impl SurvivalCurve {
    /// Value at grid point `k`, if present.
    pub fn at(&self, k: usize) -> Option<f64> {
        self.k_grid.binary_search(&k).ok().map(|i| self.values[i])
    }
}

/// Law of one fiber coordinate during a recursion.
#[derive(Clone, Copy)]
enum SymbolLaw<'a> {
    Pinned(usize),
    Random(&'a [f64]),
}

/// Exact survival recursions for one pattern under one fiber family.
#[derive(Debug, Clone)]
pub struct SurvivalEngine<'a> {
    fm: &'a FiberMeasure,
    automaton: PatternAutomaton,
}

impl<'a> SurvivalEngine<'a> {
    pub fn new(fm: &'a FiberMeasure, pat: &Pattern) -> Result<Self> {
        let b = fm.fiber_alphabet_size();
        if pat.symbols().iter().any(|&a| a >= b) {
            return Err(invalid(format!("pattern {pat} uses symbols outside 0..{b}")));
        }
        Ok(Self { fm, automaton: PatternAutomaton::new(pat, b) })
    }

    pub fn automaton(&self) -> &PatternAutomaton {
        &self.automaton
    }

    pub fn pattern(&self) -> &Pattern {
        self.automaton.pattern()
    }

    fn n(&self) -> usize {
        self.automaton.accepting()
    }

    /// Reads `prefix_len` symbols without recording, then `steps` symbols,
    /// recording the surviving mass before the first and after each of them.
    /// Positions are fiber coordinates starting at `first_pos`.
    fn masked_run<'w, F>(&self, start: usize, mass: f64, first_pos: usize, prefix_len: usize, steps: usize, law: F) -> Vec<f64>
    where
        F: Fn(usize) -> SymbolLaw<'w>,
    {
        let n = self.n();
        let b = self.automaton.alphabet();
        debug_assert!(start < n);
        let mut cur = vec![0.0f64; n];
        let mut next = vec![NeumaierSum::ZERO; n];
        cur[start] = mass;
        let mut out = Vec::with_capacity(steps + 1);
        if prefix_len == 0 {
            out.push(mass);
        }

        for read in 0..prefix_len + steps {
            next.iter_mut().for_each(|x| *x = NeumaierSum::ZERO);
            match law(first_pos + read) {
                SymbolLaw::Pinned(a) => {
                    for (s, &v) in cur.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                        let t = self.automaton.next(s, a);
                        if t < n {
                            next[t].add(v);
                        }
                    }
                }
                SymbolLaw::Random(row) => {
                    for (s, &v) in cur.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                        for (a, &p) in row.iter().enumerate().take(b) {
                            let t = self.automaton.next(s, a);
                            if t < n {
                                next[t].add(v * p);
                            }
                        }
                    }
                }
            }
            for (c, x) in cur.iter_mut().zip(&next) {
                *c = x.value();
            }
            if read + 1 >= prefix_len {
                out.push(compensated::sum(cur.iter().copied()));
            }
        }
        out
    }

    /// `μ_{θ^offset ω}(τ_A > k)` for `k = 0..=k_max`.
    pub fn survival(&self, window: &BaseWindow, offset: usize, k_max: usize) -> Result<Vec<f64>> {
        let n = self.n();
        window.require(offset + k_max + n)?;
        let fm = self.fm;
        let mut out = self.masked_run(0, 1.0, 1, n - 1, k_max, |pos| SymbolLaw::Random(fm.row(window[offset + pos])));
        // n - 1 reads cannot complete an occurrence; only rounding moves this off 1
        out[0] = 1.0;
        Ok(out)
    }

    /// `μ_{θ^offset ω}(A ∩ {τ_A > j})` for `j = 0..=j_max`.
    pub fn return_survival(&self, window: &BaseWindow, offset: usize, j_max: usize) -> Result<Vec<f64>> {
        let n = self.n();
        window.require(offset + j_max + n)?;
        let fm = self.fm;
        let mass = fm.cylinder_measure(window, self.pattern(), offset)?;
        Ok(self.masked_run(self.automaton.border(), mass, n, 0, j_max, |pos| {
            SymbolLaw::Random(fm.row(window[offset + pos]))
        }))
    }

    /// `μ_{θ^offset ω}(A ∩ σ^{-gap}{τ_A > j})` for `j = 0..=j_max`.
    ///
    /// When `gap >= n - 1` the two events live on disjoint coordinate blocks
    /// and the product-measure identity
    /// `μ_{θ^i ω}(A) · μ_{θ^{i+gap} ω}(τ_A > j)` is used; otherwise the
    /// overlapping coordinates are pinned to the pattern.
    pub fn shifted_joint(&self, window: &BaseWindow, offset: usize, gap: usize, j_max: usize) -> Result<Vec<f64>> {
        let n = self.n();
        window.require(offset + gap + j_max + n)?;
        let mass = self.fm.cylinder_measure(window, self.pattern(), offset)?;
        if gap + 1 >= n {
            let tail = self.survival(window, offset + gap, j_max)?;
            return Ok(tail.into_iter().map(|v| mass * v).collect());
        }
        Ok(self.pinned_joint(window, offset, gap, j_max, mass))
    }

    fn pinned_joint(&self, window: &BaseWindow, offset: usize, gap: usize, j_max: usize, mass: f64) -> Vec<f64> {
        let n = self.n();
        let fm = self.fm;
        let y = self.pattern().symbols();
        self.masked_run(0, mass, gap + 1, n - 1, j_max, |pos| {
            if pos < n {
                SymbolLaw::Pinned(y[pos])
            } else {
                SymbolLaw::Random(fm.row(window[offset + pos]))
            }
        })
    }

    #[doc(hidden)]
    pub fn shifted_joint_by_pinning(&self, window: &BaseWindow, offset: usize, gap: usize, j_max: usize) -> Result<Vec<f64>> {
        window.require(offset + gap + j_max + self.n())?;
        let mass = self.fm.cylinder_measure(window, self.pattern(), offset)?;
        Ok(self.pinned_joint(window, offset, gap, j_max, mass))
    }
}

fn meta(pat: &Pattern, window: &BaseWindow, offset: usize) -> CurveMeta {
    CurveMeta { pattern: pat.to_string(), window_start: window.start_index(), offset }
}

/// Exact `μ_{θ^offset ω}(τ_A > k)`, `k = 0..=k_max`, for `A = C^n(pat)`.
pub fn quenched_survival(fm: &FiberMeasure, window: &BaseWindow, pat: &Pattern, offset: usize, k_max: usize) -> Result<SurvivalCurve> {
    let values = SurvivalEngine::new(fm, pat)?.survival(window, offset, k_max)?;
    Ok(SurvivalCurve { k_grid: (0..=k_max).collect(), values, t_grid: None, meta: meta(pat, window, offset) })
}

/// Exact `μ_{θ^offset ω}(A ∩ {τ_A > j})`, `j = 0..=k_max`.
pub fn conditional_return_survival(
    fm: &FiberMeasure,
    window: &BaseWindow,
    pat: &Pattern,
    offset: usize,
    k_max: usize,
) -> Result<SurvivalCurve> {
    let values = SurvivalEngine::new(fm, pat)?.return_survival(window, offset, k_max)?;
    Ok(SurvivalCurve { k_grid: (0..=k_max).collect(), values, t_grid: None, meta: meta(pat, window, offset) })
}

pub(crate) fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("empty t grid"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t grid values must be finite and >= 0"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t grid must be strictly increasing"));
    }
    Ok(())
}

/// `k_{A,t} = ⌊t / μ(A)⌋` for every `t`, refusing values above `step_cap`.
pub fn rescaled_steps(measure: f64, t_grid: &[f64], step_cap: usize) -> Result<Vec<usize>> {
    check_t_grid(t_grid)?;
    t_grid
        .iter()
        .map(|&t| {
            let k = (t / measure).floor();
            if k > step_cap as f64 {
                Err(Error::ResourceLimit(format!(
                    "k = {k} at t = {t} exceeds the step cap {step_cap} (mu(A) = {measure:e})"
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Quenched survival on the rescaled axis: value at `t` is
/// `μ_ω(τ_A > ⌊t / μ(A)⌋)` with `μ(A)` the marginal measure of the cylinder.
/// The window is extended as needed.
pub fn rescaled_survival(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    window: &mut BaseWindow,
    pat: &Pattern,
    t_grid: &[f64],
    step_cap: usize,
) -> Result<SurvivalCurve> {
    let measure = fm.marginal_cylinder_measure(proc, pat)?;
    let k_grid = rescaled_steps(measure, t_grid, step_cap)?;
    let k_max = *k_grid.iter().max().unwrap();
    window.extend_to(k_max + pat.len());
    let full = SurvivalEngine::new(fm, pat)?.survival(window, 0, k_max)?;
    let values = k_grid.iter().map(|&k| full[k]).collect();
    Ok(SurvivalCurve { k_grid, values, t_grid: Some(t_grid.to_vec()), meta: meta(pat, window, 0) })
}

/// Outcome of a simulated hitting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HittingTime {
    Hit(usize),
    /// No occurrence at positions `1..=cap`.
    Censored(usize),
}

impl HittingTime {
    /// Whether `τ > k` is known to hold.
    pub fn exceeds(&self, k: usize) -> bool {
        match *self {
            HittingTime::Hit(t) => t > k,
            HittingTime::Censored(cap) => {
                debug_assert!(k <= cap);
                true
            }
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, HittingTime::Censored(_))
    }
}

/// Simulates `τ_A` for a fiber point drawn lazily from `μ_ω`, returning the
/// first start position in `1..=cap`. Uses `O(n)` memory.
pub fn sample_hitting_time<R: Rng + ?Sized>(
    fm: &FiberMeasure,
    window: &mut BaseWindow,
    pat: &Pattern,
    rng: &mut R,
    cap: usize,
) -> Result<HittingTime> {
    let engine = SurvivalEngine::new(fm, pat)?;
    let sampler = FiberSampler::new(fm);
    Ok(simulate_hit(&engine, &sampler, window, rng, cap))
}

pub(crate) fn simulate_hit<R: Rng + ?Sized>(
    engine: &SurvivalEngine<'_>,
    sampler: &FiberSampler,
    window: &mut BaseWindow,
    rng: &mut R,
    cap: usize,
) -> HittingTime {
    let a = engine.automaton();
    let n = a.accepting();
    let mut state = 0;
    // x_1 .. x_{n-1} cannot complete an occurrence starting at a position >= 1
    let mut pos = 1;
    while pos < cap + n {
        if window.len() <= pos {
            window.extend_to((2 * pos).max(64));
            if window.len() <= pos {
                return HittingTime::Censored(pos.saturating_sub(n));
            }
        }
        state = a.next(state, sampler.draw(window[pos], rng));
        if state == n {
            return HittingTime::Hit(pos + 1 - n);
        }
        pos += 1;
    }
    HittingTime::Censored(cap)
}

/// Fraction of samples with `τ > k` for each `k`.
pub fn empirical_survival(times: &[HittingTime], k_grid: &[usize]) -> Vec<f64> {
    let total = times.len() as f64;
    k_grid.iter().map(|&k| times.iter().filter(|t| t.exceeds(k)).count() as f64 / total).collect()
}

/// Noise-averaged survival on the rescaled axis with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedCurve {
    pub t_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_windows: usize,
}

/// Averages [`rescaled_survival`] over `n_windows` independent base windows;
/// window `w` uses the window lane of item `w`.
pub fn annealed_survival(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    pat: &Pattern,
    t_grid: &[f64],
    n_windows: usize,
    seed: u64,
    step_cap: usize,
) -> Result<AnnealedCurve> {
    if n_windows == 0 {
        return Err(invalid("n_windows must be at least 1"));
    }
    let measure = fm.marginal_cylinder_measure(proc, pat)?;
    let k_grid = rescaled_steps(measure, t_grid, step_cap)?;
    let k_max = *k_grid.iter().max().unwrap();
    let engine = SurvivalEngine::new(fm, pat)?;
    let curves = (0..n_windows)
        .into_par_iter()
        .map(|w| {
            let window = proc.sample_window_from(rng::item_stream(seed, w as u64, rng::lanes::WINDOW), k_max + pat.len())?;
            let full = engine.survival(&window, 0, k_max)?;
            Ok(k_grid.iter().map(|&k| full[k]).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let m = n_windows as f64;
    let mut mean = Vec::with_capacity(k_grid.len());
    let mut stderr = Vec::with_capacity(k_grid.len());
    for i in 0..k_grid.len() {
        let mu = compensated::sum(curves.iter().map(|c| c[i])) / m;
        let se = if n_windows > 1 {
            let var = compensated::sum(curves.iter().map(|c| (c[i] - mu).powi(2))) / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        mean.push(mu);
        stderr.push(se);
    }
    Ok(AnnealedCurve { t_grid: t_grid.to_vec(), k_grid, mean, stderr, n_windows })
}
