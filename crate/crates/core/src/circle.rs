//! Random compositions of `x ↦ m x mod 1` on the circle in exact arithmetic.
//!
//! A base symbol `ω_k ∈ {0, 1}` selects the multiplier applied at step `k`,
//! so `f_ω^k = f_{ω_{k-1}} ∘ ... ∘ f_{ω_0}`. Every such map preserves
//! Lebesgue measure, which is therefore the sample measure for every `ω`.
//!
//! Points are either dyadic ([`CirclePoint`], `N / 2^B` with `B` a multiple
//! of 64) or rational ([`RationalPoint`], `a / q`). Both are iterated without
//! rounding. A dyadic point standing in for a uniform real loses
//! `log2 m` significant bits per step, so its precision must cover the
//! horizon: [`bits_for_horizon`] gives `⌈steps · log2(max m)⌉ + 64`, and
//! running past it is an error.
//!
//! Correlation decay for Lipschitz observables is assumed from the classical
//! theory of expanding circle maps and is not re-estimated here.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{BaseProcess, BaseWindow};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::stats::ks_to_exponential;
use crate::survival::{check_t_grid, empirical_survival, rescaled_steps, HittingTime};

const GUARD_BITS: u64 = 64;
const TRIAL_BLOCK: usize = 256;

/// Largest `k_{r,t}` accepted by [`quenched_law_statistic`].
pub const DEFAULT_CIRCLE_STEP_CAP: usize = 1 << 22;

/// Two expanding multipliers driven by a base process over `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleRDS {
    multipliers: [u64; 2],
    base: BaseProcess,
}

impl CircleRDS {
    pub fn new(m0: u64, m1: u64, base: BaseProcess) -> Result<Self> {
        if m0 < 2 || m1 < 2 {
            return Err(invalid(format!("multipliers must be at least 2, got ({m0}, {m1})")));
        }
        if m0 > u32::MAX as u64 || m1 > u32::MAX as u64 {
            return Err(invalid("multipliers must fit in 32 bits"));
        }
        if base.alphabet_size() != 2 {
            return Err(invalid(format!("circle base must be over {{0,1}}, got {} symbols", base.alphabet_size())));
        }
        Ok(Self { multipliers: [m0, m1], base })
    }

    /// `×2` and `×3` driven by fair coin flips.
    pub fn doubling_tripling() -> Self {
        Self::new(2, 3, BaseProcess::bernoulli(vec![0.5, 0.5]).expect("fair coin")).expect("valid")
    }

    pub fn multipliers(&self) -> [u64; 2] {
        self.multipliers
    }

    pub fn base(&self) -> &BaseProcess {
        &self.base
    }

    pub fn max_multiplier(&self) -> u64 {
        self.multipliers[0].max(self.multipliers[1])
    }

    pub fn multiplier(&self, symbol: usize) -> u64 {
        self.multipliers[symbol]
    }

    /// Precision needed to follow a uniform point for `steps` steps.
    pub fn bits_for(&self, steps: usize) -> u64 {
        bits_for_horizon(steps, self.max_multiplier())
    }
}

/// `⌈steps · log2(max_multiplier)⌉ + 64`.
pub fn bits_for_horizon(steps: usize, max_multiplier: u64) -> u64 {
    let per_step = if max_multiplier.is_power_of_two() {
        max_multiplier.trailing_zeros() as f64
    } else {
        (max_multiplier as f64).log2()
    };
    (steps as f64 * per_step).ceil() as u64 + GUARD_BITS
}

/// A point of the circle that can be pushed forward exactly.
pub trait CircleState: Clone + PartialEq + Send + Sync {
    /// `x ↦ m x mod 1`.
    fn mul_mod1(&mut self, m: u64);

    /// `⌊x · 2^128⌋` and whether `x · 2^128` has a nonzero fractional part.
    fn leading(&self) -> (u128, bool);

    /// Steps this point can be iterated while its leading bits stay
    /// meaningful under `max_multiplier`; `None` for points that never run out.
    fn horizon(&self, max_multiplier: u64) -> Option<usize>;

    fn to_f64(&self) -> f64 {
        (self.leading().0 >> 75) as f64 / (1u64 << 53) as f64
    }
}

/// `N / 2^B` with `N` stored as little-endian 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    words: Vec<u64>,
}

impl CirclePoint {
    fn word_count(bits: u64) -> usize {
        (bits.div_ceil(64) as usize).max(2)
    }

    /// The point 0 at precision `bits` (rounded up to whole words, at least 128).
    pub fn zero(bits: u64) -> Self {
        Self { words: vec![0; Self::word_count(bits)] }
    }

    /// A uniformly distributed dyadic point at precision `bits`.
    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> Self {
        Self { words: (0..Self::word_count(bits)).map(|_| rng.next_u64()).collect() }
    }

    /// `N / 2^(64 · words.len())` from the little-endian words of `N`.
    pub fn from_words(words: Vec<u64>) -> Result<Self> {
        if words.len() < 2 {
            return Err(invalid("a dyadic point needs at least two words"));
        }
        Ok(Self { words })
    }

    /// `a / 2^j` for `j ≤ 64`, at precision `bits`.
    pub fn dyadic(a: u64, j: u32, bits: u64) -> Result<Self> {
        if j > 64 || (j < 64 && a >> j != 0) {
            return Err(invalid(format!("{a}/2^{j} is not in [0,1)")));
        }
        let mut p = Self::zero(bits);
        let top = p.words.len() - 1;
        p.words[top] = if j == 0 { 0 } else { a << (64 - j) };
        Ok(p)
    }

    pub fn precision_bits(&self) -> u64 {
        64 * self.words.len() as u64
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

impl CircleState for CirclePoint {
    fn mul_mod1(&mut self, m: u64) {
        let mut carry: u128 = 0;
        for w in self.words.iter_mut() {
            let v = *w as u128 * m as u128 + carry;
            *w = v as u64;
            carry = v >> 64;
        }
    }

    fn leading(&self) -> (u128, bool) {
        let k = self.words.len();
        let top = ((self.words[k - 1] as u128) << 64) | self.words[k - 2] as u128;
        (top, self.words[..k - 2].iter().any(|&w| w != 0))
    }

    fn horizon(&self, max_multiplier: u64) -> Option<usize> {
        let usable = self.precision_bits() - GUARD_BITS;
        let per_step = (max_multiplier as f64).log2();
        let mut h = (usable as f64 / per_step).floor() as usize;
        while h > 0 && bits_for_horizon(h, max_multiplier) > self.precision_bits() {
            h -= 1;
        }
        Some(h)
    }
}

/// `num / den` with `0 ≤ num < den < 2^63`, not necessarily in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalPoint {
    num: u64,
    den: u64,
}

impl RationalPoint {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || den >= 1 << 63 {
            return Err(invalid(format!("denominator {den} must lie in 1..2^63")));
        }
        Ok(Self { num: num % den, den })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }
}

impl CircleState for RationalPoint {
    fn mul_mod1(&mut self, m: u64) {
        self.num = ((self.num as u128 * m as u128) % self.den as u128) as u64;
    }

    fn leading(&self) -> (u128, bool) {
        let q = self.den as u128;
        let a = self.num as u128;
        let hi = (a << 64) / q;
        let r1 = (a << 64) % q;
        let lo = (r1 << 64) / q;
        let r2 = (r1 << 64) % q;
        ((hi << 64) | lo, r2 != 0)
    }

    fn horizon(&self, _max_multiplier: u64) -> Option<usize> {
        None
    }
}

fn check_bits(bits: &[usize], steps: usize) -> Result<()> {
    if bits.len() < steps {
        return Err(invalid(format!("{} base symbols for {steps} steps", bits.len())));
    }
    if let Some(&s) = bits[..steps].iter().find(|&&s| s > 1) {
        return Err(invalid(format!("base symbol {s} is not 0 or 1")));
    }
    Ok(())
}

fn check_budget<P: CircleState>(rds: &CircleRDS, x0: &P, steps: usize) -> Result<()> {
    match x0.horizon(rds.max_multiplier()) {
        Some(h) if h < steps => Err(Error::BudgetExceeded(format!(
            "{steps} steps need {} bits of precision, the starting point has a horizon of {h} steps",
            rds.bits_for(steps)
        ))),
        _ => Ok(()),
    }
}

/// Lazily yields `f_ω^k(x0)` for `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct Orbit<'a, P> {
    rds: &'a CircleRDS,
    bits: &'a [usize],
    point: P,
    k: usize,
    steps: usize,
}

impl<P: CircleState> Iterator for Orbit<'_, P> {
    type Item = P;

    fn next(&mut self) -> Option<P> {
        if self.k > self.steps {
            return None;
        }
        if self.k > 0 {
            self.point.mul_mod1(self.rds.multiplier(self.bits[self.k - 1]));
        }
        self.k += 1;
        Some(self.point.clone())
    }
}

pub fn random_orbit<'a, P: CircleState>(rds: &'a CircleRDS, bits: &'a [usize], x0: P, steps: usize) -> Result<Orbit<'a, P>> {
    check_bits(bits, steps)?;
    check_budget(rds, &x0, steps)?;
    Ok(Orbit { rds, bits, point: x0, k: 0, steps })
}

/// The open ball `{x : d(x, y) < r}` with center and radius on the `2^-128` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallTarget {
    center: u128,
    radius: u128,
}

fn to_fixed128(x: f64) -> u128 {
    // x in [0, 1): exact for every f64 at least 2^-75; below that, rounded.
    let scaled = x * 2f64.powi(64);
    let hi = scaled.floor();
    let lo = ((scaled - hi) * 2f64.powi(64)).round();
    ((hi as u128) << 64).wrapping_add(lo as u128)
}

impl BallTarget {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&center) {
            return Err(invalid(format!("center {center} outside [0,1)")));
        }
        if !(radius > 0.0 && radius < 0.5) {
            return Err(invalid(format!("radius {radius} outside (0, 1/2)")));
        }
        let radius = to_fixed128(radius);
        if radius == 0 {
            return Err(invalid("radius below the 2^-128 grid"));
        }
        Ok(Self { center: to_fixed128(center), radius })
    }

    pub fn center(&self) -> f64 {
        self.center as f64 / 2f64.powi(128)
    }

    pub fn radius(&self) -> f64 {
        self.radius as f64 / 2f64.powi(128)
    }

    /// Lebesgue measure `min(2r, 1)`.
    pub fn measure(&self) -> f64 {
        (2.0 * self.radius()).min(1.0)
    }

    pub fn contains<P: CircleState>(&self, x: &P) -> bool {
        let (top, rest) = x.leading();
        let left = self.center.wrapping_sub(self.radius);
        let d = top.wrapping_sub(left);
        d < 2 * self.radius && (d > 0 || rest)
    }
}

/// First `k ∈ 1..=cap` with `f_ω^k(x0)` in the ball.
pub fn hitting_time_ball<P: CircleState>(rds: &CircleRDS, bits: &[usize], x0: P, target: &BallTarget, cap: usize) -> Result<HittingTime> {
    if cap == 0 {
        return Err(invalid("cap must be at least 1"));
    }
    check_bits(bits, cap)?;
    check_budget(rds, &x0, cap)?;
    Ok(hit_unchecked(rds, bits, x0, target, cap))
}

fn hit_unchecked<P: CircleState>(rds: &CircleRDS, bits: &[usize], mut x: P, target: &BallTarget, cap: usize) -> HittingTime {
    for (k, &s) in bits[..cap].iter().enumerate() {
        x.mul_mod1(rds.multiplier(s));
        if target.contains(&x) {
            return HittingTime::Hit(k + 1);
        }
    }
    HittingTime::Censored(cap)
}

/// Empirical quenched survival for one `(ω, y, r)` and its distance to `e^{-t}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleLaw {
    pub y: f64,
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub survival: Vec<f64>,
    pub delta_r: f64,
    pub trials: usize,
    pub censored: usize,
    pub precision_bits: u64,
    /// More trials outlived the horizon than twice the exponential tail predicts.
    pub widened_uncertainty: bool,
}

/// Draws `trials` uniform starting points, records `τ > ⌊t / 2r⌋` per `t`
/// and reports `Δ_r = sup_t |survival(t) - e^{-t}|`.
///
/// Trials are grouped in blocks of 256; block `b` draws from the start
/// lane of item `b`.
#[allow(clippy::too_many_arguments)]
pub fn quenched_law_statistic(
    rds: &CircleRDS,
    window: &mut BaseWindow,
    y: f64,
    r: f64,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CircleLaw> {
    if trials < 100 {
        return Err(invalid(format!("trials = {trials}; at least 100 are needed")));
    }
    check_t_grid(t_grid)?;
    let target = BallTarget::new(y, r)?;
    let k_grid = rescaled_steps(target.measure(), t_grid, DEFAULT_CIRCLE_STEP_CAP)?;
    let horizon = (*k_grid.iter().max().unwrap()).max(1);
    window.extend_to(horizon);
    let bits = &window.symbols()[..horizon];
    check_bits(bits, horizon)?;
    let precision = rds.bits_for(horizon);

    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let times: Vec<HittingTime> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng::item_stream(seed, b as u64, rng::lanes::START);
            let count = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            (0..count)
                .map(|_| hit_unchecked(rds, bits, CirclePoint::uniform(&mut rng, precision), &target, horizon))
                .collect::<Vec<_>>()
        })
        .collect();

    let survival = empirical_survival(&times, &k_grid);
    let report = ks_to_exponential(&survival, t_grid)?;
    let censored = times.iter().filter(|t| t.is_censored()).count();
    let t_max = t_grid[t_grid.len() - 1];
    Ok(CircleLaw {
        y,
        r,
        t_grid: t_grid.to_vec(),
        k_grid,
        survival,
        delta_r: report.sup_abs_err,
        trials,
        censored,
        precision_bits: CirclePoint::zero(precision).precision_bits(),
        widened_uncertainty: censored as f64 > 2.0 * (-t_max).exp() * trials as f64,
    })
}

/// Checks `μ(B(y, r+ρ)) ≤ μ(B(y, r)) + ρ / r` for circle Lebesgue measure.
pub fn annulus_mass_check(y: f64, r: f64, rho: f64) -> Result<bool> {
    if !(0.0..1.0).contains(&y) {
        return Err(invalid(format!("center {y} outside [0,1)")));
    }
    if !(0.0 < rho && rho < r && r < 0.5) {
        return Err(invalid(format!("need 0 < ρ < r < 1/2, got ρ = {rho}, r = {r}")));
    }
    let outer = (2.0 * (r + rho)).min(1.0);
    let inner = (2.0 * r).min(1.0);
    Ok(outer <= inner + rho / r)
}

/// Smallest `k ∈ 1..=horizon` with `f_ω^k(x0) = x0`.
pub fn find_period<P: CircleState>(rds: &CircleRDS, bits: &[usize], x0: &P, horizon: usize) -> Result<Option<usize>> {
    check_bits(bits, horizon)?;
    let mut x = x0.clone();
    for (k, &s) in bits[..horizon].iter().enumerate() {
        x.mul_mod1(rds.multiplier(s));
        if x == *x0 {
            return Ok(Some(k + 1));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicityReport {
    pub trials: usize,
    pub periodic: usize,
    pub fraction: f64,
}

/// Fraction of uniform starting points that return exactly to themselves
/// within `horizon` steps.
pub fn aperiodicity_probe(rds: &CircleRDS, bits: &[usize], trials: usize, horizon: usize, seed: u64) -> Result<PeriodicityReport> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    check_bits(bits, horizon)?;
    let precision = rds.bits_for(horizon);
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let periodic: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::item_stream(seed, b as u64, rng::lanes::START);
            let count = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            (0..count)
                .filter(|_| {
                    let x0 = CirclePoint::uniform(&mut rng, precision);
                    find_period(rds, bits, &x0, horizon).expect("bits checked").is_some()
                })
                .count()
        })
        .sum();
    Ok(PeriodicityReport { trials, periodic, fraction: periodic as f64 / trials as f64 })
}
