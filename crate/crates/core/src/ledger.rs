//! Exact error decomposition for the rescaled survival of a cylinder target.
//!
//! For `A = C^n(y)`, a base window `ω` and a horizon `t`, with
//! `k = ⌊t / μ(A)⌋` and `μ_i = μ_{θ^i ω}(A)`:
//!
//! * `M = Σ_{i=1}^k μ_i`
//! * `G = Σ μ_{θ^i ω}(A ∩ {τ_A ≤ g})`
//! * `H = Σ sup_j |μ_{θ^i ω}(A ∩ σ^{-g}{τ_A > j}) - μ_i μ_{θ^{i+g} ω}(τ_A > j)|`
//! * `K = Σ μ_i μ_{θ^i ω}(τ_A ≤ g)`
//! * `δ_i = sup_j |μ_i μ_{θ^i ω}(τ_A > j) - μ_{θ^i ω}(A ∩ {τ_A > j})|`
//!
//! Every sup over `j ≥ 1` is taken over `1..=jmax`, so the reported sums
//! are lower bounds of the untruncated ones.

use rayon::prelude::*;
use serde::Serialize;

use crate::automaton::PatternAutomaton;
use crate::base::{BaseProcess, BaseWindow};
use crate::compensated::{self, NeumaierSum};
use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberMeasure, FiberSampler, Pattern};
use crate::rng::{self, StreamRng};
use crate::stats::mean_and_stderr;
use crate::survival::SurvivalEngine;

/// Default bound on the elementary operations of one ledger.
pub const DEFAULT_OP_BUDGET: u64 = 20_000_000_000;

/// Default bound on a scanned return time in [`estimate_entropies`].
pub const DEFAULT_RETURN_CAP: usize = 1 << 22;

/// The decomposition for one `(ω, A, t, g)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorLedger {
    pub n: usize,
    pub t: f64,
    pub gap: usize,
    pub k: usize,
    pub jmax: usize,
    /// Marginal measure `μ(A)`.
    pub measure: f64,
    pub m: f64,
    pub g: f64,
    pub h: f64,
    #[serde(rename = "K")]
    pub k_term: f64,
    pub delta_sum: f64,
    pub lemma_lhs: f64,
    pub lemma_rhs: f64,
    pub sandwich_gap: f64,
    /// Always set: the sups in `delta_sum` and `H` run over `1..=jmax` only,
    /// so both are lower bounds of the untruncated sums.
    pub sups_truncated: bool,
    /// `jmax ≥ k - 1`, so every `j` used by the recursion bound is covered.
    pub covers_recursion: bool,
}

impl ErrorLedger {
    /// `delta_sum ≤ G + H + K` up to `1e-12`.
    pub fn decomposition_holds(&self) -> bool {
        self.delta_sum <= self.g + self.h + self.k_term + 1e-12
    }

    pub fn lemma_holds(&self) -> bool {
        self.lemma_lhs <= self.lemma_rhs + 1e-12
    }
}

/// `k = ⌊t / μ(A)⌋`.
pub fn steps_for(measure: f64, t: f64) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("t = {t} must be finite and nonnegative")));
    }
    let k = (t / measure).floor();
    if k > usize::MAX as f64 / 4.0 {
        return Err(Error::ResourceLimit(format!("k = {k} at t = {t} does not fit")));
    }
    Ok(k as usize)
}

fn ledger_cost(k: usize, gap: usize, jmax: usize, n: usize, b: usize) -> u128 {
    4 * k as u128 * (jmax + gap + n) as u128 * n as u128 * b as u128
}

struct OffsetTerms {
    mu: f64,
    g: f64,
    h: f64,
    k: f64,
    delta: f64,
}

fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).skip(1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn offset_terms(engine: &SurvivalEngine<'_>, window: &BaseWindow, i: usize, gap: usize, jmax: usize) -> Result<OffsetTerms> {
    let surv = engine.survival(window, i, jmax.max(gap))?;
    let ret = engine.return_survival(window, i, jmax.max(gap))?;
    let mu = ret[0];
    let scaled: Vec<f64> = surv.iter().take(jmax + 1).map(|s| mu * s).collect();
    let delta = sup_abs_diff(&scaled, &ret[..=jmax]);
    let joint = engine.shifted_joint(window, i, gap, jmax)?;
    let later = engine.survival(window, i + gap, jmax)?;
    let decoupled: Vec<f64> = later.iter().map(|s| mu * s).collect();
    let h = sup_abs_diff(&joint, &decoupled);
    Ok(OffsetTerms {
        mu,
        g: (mu - ret[gap]).max(0.0),
        h,
        k: mu * (1.0 - surv[gap]),
        delta,
    })
}

/// `|μ_ω(τ > k) - Π(1-μ_i)|` and `Σ δ_i Π_{j<i}(1-μ_j)` from per-offset terms.
fn lemma_sides(survival_k: f64, mus: &[f64], deltas: &[f64]) -> (f64, f64, f64) {
    let mut prod = 1.0;
    let mut rhs = NeumaierSum::ZERO;
    for (mu, d) in mus.iter().zip(deltas) {
        rhs.add(d * prod);
        prod *= 1.0 - mu;
    }
    ((survival_k - prod).abs(), rhs.value(), prod)
}

/// Computes the full ledger, extending `window` as needed.
///
/// `jmax` defaults to `4k`. Fails with a resource-limit error when the
/// estimated operation count exceeds `op_budget`.
#[allow(clippy::too_many_arguments)]
pub fn compute_ledger(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    window: &mut BaseWindow,
    pat: &Pattern,
    t: f64,
    gap: usize,
    jmax: Option<usize>,
    op_budget: u64,
) -> Result<ErrorLedger> {
    fm.check_compatible(proc)?;
    let n = pat.len();
    let measure = fm.marginal_cylinder_measure(proc, pat)?;
    let k = steps_for(measure, t)?;
    if gap == 0 {
        return Err(invalid("gap must be at least 1"));
    }
    if gap > k {
        return Err(invalid(format!("gap {gap} exceeds k = {k} (n = {n}, t = {t})")));
    }
    let jmax = jmax.unwrap_or(4 * k).max(1);
    let cost = ledger_cost(k, gap, jmax, n, fm.fiber_alphabet_size());
    if cost > op_budget as u128 {
        return Err(Error::ResourceLimit(format!(
            "ledger at n = {n}, t = {t} needs about {cost} operations (budget {op_budget})"
        )));
    }
    window.extend_to(k + gap + jmax.max(gap) + n + 1);
    let window: &BaseWindow = window;
    let engine = SurvivalEngine::new(fm, pat)?;

    let terms = (1..=k)
        .into_par_iter()
        .map(|i| offset_terms(&engine, window, i, gap, jmax))
        .collect::<Result<Vec<_>>>()?;

    let mus: Vec<f64> = terms.iter().map(|x| x.mu).collect();
    let deltas: Vec<f64> = terms.iter().map(|x| x.delta).collect();
    let survival_k = engine.survival(window, 0, k)?[k];
    let (lemma_lhs, lemma_rhs, prod) = lemma_sides(survival_k, &mus, &deltas);
    let m = compensated::sum(mus.iter().copied());
    Ok(ErrorLedger {
        n,
        t,
        gap,
        k,
        jmax,
        measure,
        m,
        g: compensated::sum(terms.iter().map(|x| x.g)),
        h: compensated::sum(terms.iter().map(|x| x.h)),
        k_term: compensated::sum(terms.iter().map(|x| x.k)),
        delta_sum: compensated::sum(deltas.iter().copied()),
        lemma_lhs,
        lemma_rhs,
        sandwich_gap: (prod - (-m).exp()).abs(),
        sups_truncated: true,
        covers_recursion: jmax + 1 >= k,
    })
}

/// Both sides of the recursive-substitution bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// The bound at `k = ⌊t / μ(A)⌋`.
pub fn verify_recursion_bound(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    window: &mut BaseWindow,
    pat: &Pattern,
    t: f64,
) -> Result<RecursionCheck> {
    fm.check_compatible(proc)?;
    let k = steps_for(fm.marginal_cylinder_measure(proc, pat)?, t)?;
    window.extend_to(2 * k + pat.len() + 2);
    recursion_bound_at(fm, window, pat, k)
}

/// The bound at an explicit `k`. Only `j < k` enters the recursion, so the
/// sups are taken over `j ≤ k` and are exact for this purpose.
pub fn recursion_bound_at(fm: &FiberMeasure, window: &BaseWindow, pat: &Pattern, k: usize) -> Result<RecursionCheck> {
    let engine = SurvivalEngine::new(fm, pat)?;
    let jmax = k.max(1);
    let mut mus = Vec::with_capacity(k);
    let mut deltas = Vec::with_capacity(k);
    for i in 1..=k {
        let surv = engine.survival(window, i, jmax)?;
        let ret = engine.return_survival(window, i, jmax)?;
        let mu = ret[0];
        let scaled: Vec<f64> = surv.iter().map(|s| mu * s).collect();
        mus.push(mu);
        deltas.push(sup_abs_diff(&scaled, &ret));
    }
    let survival_k = engine.survival(window, 0, k)?[k];
    let (lhs, rhs, _) = lemma_sides(survival_k, &mus, &deltas);
    Ok(RecursionCheck { k, lhs, rhs, pass: lhs <= rhs + 1e-12 })
}

/// Bounds of `exp(-(1 ± 2ε) Σ x)` around `Π (1 - x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichCheck {
    pub lower: f64,
    pub product: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Checks `exp(-(1+2ε)S) ≤ Π(1-x_i) ≤ exp(-(1-2ε)S)` with `1e-14` slack.
pub fn verify_sandwich(xs: &[f64], eps: f64) -> Result<SandwichCheck> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(invalid(format!("ε = {eps} must lie in (0, 1/2]")));
    }
    if let Some(x) = xs.iter().find(|x| !(0.0..=eps).contains(*x)) {
        return Err(invalid(format!("x = {x} outside [0, {eps}]")));
    }
    let s = compensated::sum(xs.iter().copied());
    let product: f64 = xs.iter().map(|x| 1.0 - x).product();
    let lower = (-(1.0 + 2.0 * eps) * s).exp();
    let upper = (-(1.0 - 2.0 * eps) * s).exp();
    let pass = lower <= product + 1e-14 && product <= upper + 1e-14;
    Ok(SandwichCheck { lower, product, upper, pass })
}

/// `⌊e^{h0 n / 4}⌋`, at least 1. Values within `1e-9` (relative) of an
/// integer are taken to be that integer, so `h0 = ln 2, n = 8` gives 4.
pub fn gap_schedule(n: usize, h0: f64) -> usize {
    let x = (h0 * n as f64 / 4.0).exp();
    let r = x.round();
    let v = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.floor() };
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        (v as usize).max(1)
    }
}

/// `M`, `G` and `K` alone, which only need survival up to `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShortSums {
    pub k: usize,
    pub m: f64,
    pub g: f64,
    #[serde(rename = "K")]
    pub k_term: f64,
}

pub fn short_sums(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    window: &mut BaseWindow,
    pat: &Pattern,
    t: f64,
    gap: usize,
) -> Result<ShortSums> {
    fm.check_compatible(proc)?;
    let k = steps_for(fm.marginal_cylinder_measure(proc, pat)?, t)?;
    window.extend_to(k + gap + pat.len() + 1);
    let engine = SurvivalEngine::new(fm, pat)?;
    let (mut m, mut g, mut kt) = (NeumaierSum::ZERO, NeumaierSum::ZERO, NeumaierSum::ZERO);
    for i in 1..=k {
        let ret = engine.return_survival(window, i, gap)?;
        let surv = engine.survival(window, i, gap)?;
        let mu = ret[0];
        m.add(mu);
        g.add((mu - ret[gap]).max(0.0));
        kt.add(mu * (1.0 - surv[gap]));
    }
    Ok(ShortSums { k, m: m.value(), g: g.value(), k_term: kt.value() })
}

/// Sample mean and spread of one slope at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeStat {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub censored: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimates {
    /// `-(1/n) ln μ_ω(C^n(x))` per `n`.
    pub smb: Vec<SlopeStat>,
    /// `(1/n) ln R_n(x, x)` per `n`; censored returns enter at the cap.
    pub ow: Vec<SlopeStat>,
    /// Mean SMB slope over the (up to) three largest `n`.
    pub h_hat: f64,
    pub h0: f64,
    /// Closed-form `-Σ_a P(a) Σ_j W[a,j] ln W[a,j]`.
    pub fiber_entropy: f64,
    /// More than half the returns were censored at some `n`.
    pub widened_uncertainty: bool,
}

/// A base window and a fiber point drawn from `μ_ω`, both grown on demand.
struct FiberPath {
    window: BaseWindow,
    xs: Vec<usize>,
    rng: StreamRng,
}

impl FiberPath {
    fn ensure(&mut self, len: usize, sampler: &FiberSampler) {
        if self.xs.len() >= len {
            return;
        }
        let target = len.max(2 * self.xs.len());
        self.window.extend_to(target);
        while self.xs.len() < target {
            let w = self.window[self.xs.len()];
            self.xs.push(sampler.draw(w, &mut self.rng));
        }
    }
}

fn first_return(path: &mut FiberPath, n: usize, b: usize, sampler: &FiberSampler, cap: usize) -> Option<usize> {
    path.ensure(n, sampler);
    let pat = Pattern::new(path.xs[..n].to_vec(), b).expect("sampled symbols are in range");
    let a = PatternAutomaton::new(&pat, b);
    let mut state = 0;
    let mut pos = 1;
    while pos < cap + n {
        path.ensure(pos + 1, sampler);
        state = a.next(state, path.xs[pos]);
        if state == n {
            return Some(pos + 1 - n);
        }
        pos += 1;
    }
    None
}

/// SMB and return-time entropy slopes over `samples` independent `(ω, x)`.
pub fn estimate_entropies(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    n_range: &[usize],
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimates> {
    estimate_entropies_capped(fm, proc, n_range, samples, seed, DEFAULT_RETURN_CAP)
}

pub fn estimate_entropies_capped(
    fm: &FiberMeasure,
    proc: &BaseProcess,
    n_range: &[usize],
    samples: usize,
    seed: u64,
    cap: usize,
) -> Result<EntropyEstimates> {
    fm.check_compatible(proc)?;
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(invalid("n range must be nonempty with n ≥ 1"));
    }
    let b = fm.fiber_alphabet_size();
    let sampler = FiberSampler::new(fm);
    let per_sample = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let window = proc.sample_window_from(rng::item_stream(seed, s, rng::lanes::WINDOW), 1)?;
            let mut path = FiberPath { window, xs: Vec::new(), rng: rng::item_stream(seed, s, rng::lanes::FIBER) };
            let mut out = Vec::with_capacity(n_range.len());
            for &n in n_range {
                path.ensure(n, &sampler);
                let log_mu = compensated::sum((0..n).map(|i| fm.matrix()[path.window[i]][path.xs[i]].ln()));
                let ret = first_return(&mut path, n, b, &sampler, cap);
                out.push((-log_mu / n as f64, ret));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut smb = Vec::with_capacity(n_range.len());
    let mut ow = Vec::with_capacity(n_range.len());
    let mut widened = false;
    for (idx, &n) in n_range.iter().enumerate() {
        let slopes: Vec<f64> = per_sample.iter().map(|v| v[idx].0).collect();
        let (mean, stderr) = mean_and_stderr(&slopes);
        smb.push(SlopeStat { n, mean, stderr, censored: 0, samples });
        let censored = per_sample.iter().filter(|v| v[idx].1.is_none()).count();
        let returns: Vec<f64> = per_sample
            .iter()
            .map(|v| (v[idx].1.unwrap_or(cap) as f64).ln() / n as f64)
            .collect();
        let (mean, stderr) = mean_and_stderr(&returns);
        ow.push(SlopeStat { n, mean, stderr, censored, samples });
        widened |= 2 * censored > samples;
    }
    let mut by_n: Vec<&SlopeStat> = smb.iter().collect();
    by_n.sort_by_key(|s| std::cmp::Reverse(s.n));
    let top = &by_n[..by_n.len().min(3)];
    let h_hat = top.iter().map(|s| s.mean).sum::<f64>() / top.len() as f64;
    Ok(EntropyEstimates {
        smb,
        ow,
        h_hat,
        h0: fm.h0(),
        fiber_entropy: fm.fiber_entropy(proc),
        widened_uncertainty: widened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair() -> BaseProcess {
        BaseProcess::bernoulli(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn gap_values() {
        assert_eq!(gap_schedule(8, 2f64.ln()), 4);
        assert_eq!(gap_schedule(1, 0.01), 1);
        let h0 = -(0.7f64).ln();
        let gs: Vec<usize> = (1..60).map(|n| gap_schedule(n, h0)).collect();
        assert!(gs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sandwich_edges() {
        let c = verify_sandwich(&[0.0; 5], 0.1).unwrap();
        assert_eq!((c.lower, c.product, c.upper), (1.0, 1.0, 1.0));
        let c = verify_sandwich(&[0.5], 0.5).unwrap();
        assert!(c.pass);
        assert_eq!(c.product, 0.5);
        assert!((c.lower - (-1.0f64).exp()).abs() < 1e-15);
        assert!((c.upper - (-0.0f64).exp()).abs() < 1e-15);
        assert!(verify_sandwich(&[0.2], 0.1).is_err());
        assert!(verify_sandwich(&[0.1], 0.6).is_err());
    }

    #[test]
    fn single_symbol_ledger() {
        // n = 1 with a constant law: μ_i = p, returns are Bernoulli trials.
        let fm = FiberMeasure::new(vec![vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        let proc = fair();
        let pat = Pattern::new(vec![0], 2).unwrap();
        let mut w = proc.sample_window(4, 10).unwrap();
        let led = compute_ledger(&fm, &proc, &mut w, &pat, 2.0, 2, None, DEFAULT_OP_BUDGET).unwrap();
        let p: f64 = 0.2;
        assert_eq!(led.k, 10);
        assert!((led.m - 10.0 * p).abs() < 1e-13);
        // τ ≤ 2 has probability 1 - (1-p)^2 under every shifted measure
        let hit2 = 1.0 - (1.0 - p).powi(2);
        assert!((led.g - 10.0 * p * hit2).abs() < 1e-13);
        assert!((led.k_term - 10.0 * p * hit2).abs() < 1e-13);
        // coordinates are independent, so δ and H vanish and the lemma is tight
        assert!(led.delta_sum < 1e-15);
        assert!(led.h < 1e-15);
        assert!(led.lemma_lhs < 1e-15);
        assert!((led.sandwich_gap - ((1.0 - p).powi(10) - (-2.0f64).exp()).abs()).abs() < 1e-14);
    }

    #[test]
    fn ledger_bounds_for_overlapping_pattern() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let proc = fair();
        let pat = Pattern::parse("0000", 2).unwrap();
        let mut w = proc.sample_window(11, 8).unwrap();
        for gap in [1, 3, 4, 6] {
            let led = compute_ledger(&fm, &proc, &mut w, &pat, 1.0, gap, None, DEFAULT_OP_BUDGET).unwrap();
            assert!(led.decomposition_holds(), "{led:?}");
            assert!(led.lemma_holds(), "{led:?}");
            assert!(led.k_term <= gap as f64 * fm.q_max().powi(4) * led.m + 1e-12);
            if gap >= 4 {
                assert!(led.h.abs() < 1e-12);
            }
            for v in [led.g, led.h, led.k_term, led.delta_sum, led.lemma_lhs, led.lemma_rhs] {
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn budget_names_offending_point() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let proc = fair();
        let pat = Pattern::parse("0110", 2).unwrap();
        let mut w = proc.sample_window(1, 8).unwrap();
        match compute_ledger(&fm, &proc, &mut w, &pat, 3.0, 2, None, 1000) {
            Err(Error::ResourceLimit(m)) => assert!(m.contains("n = 4") && m.contains("t = 3"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(compute_ledger(&fm, &proc, &mut w, &pat, 0.01, 2, None, 1000).is_err());
    }

    #[test]
    fn short_sums_agree_with_ledger() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let proc = fair();
        let pat = Pattern::parse("010", 2).unwrap();
        let mut w = proc.sample_window(2, 8).unwrap();
        let led = compute_ledger(&fm, &proc, &mut w, &pat, 1.5, 3, Some(20), DEFAULT_OP_BUDGET).unwrap();
        let s = short_sums(&fm, &proc, &mut w, &pat, 1.5, 3).unwrap();
        assert_eq!(s.k, led.k);
        assert!((s.m - led.m).abs() < 1e-14);
        assert!((s.g - led.g).abs() < 1e-14);
        assert!((s.k_term - led.k_term).abs() < 1e-14);
    }

    #[test]
    fn recursion_bound_on_pair_pattern() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let proc = fair();
        let pat = Pattern::parse("00", 2).unwrap();
        for seed in 0..5 {
            let w = proc.sample_window(seed, 200).unwrap();
            for k in [1, 5, 17, 64] {
                let c = recursion_bound_at(&fm, &w, &pat, k).unwrap();
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn entropy_smoke() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let e = estimate_entropies(&fm, &fair(), &[4, 6, 8], 200, 5).unwrap();
        assert!((e.h0 - 0.35667494393873245).abs() < 1e-15);
        assert!((e.h_hat - e.fiber_entropy).abs() < 0.05);
        assert!(!e.widened_uncertainty);
        let tight = estimate_entropies_capped(&fm, &fair(), &[12], 20, 5, 2).unwrap();
        assert!(tight.widened_uncertainty);
    }
}
