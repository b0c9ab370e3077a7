//! Random Bernoulli sample measures on the full shift over `{0, ..., b-1}`.
//!
//! A stochastic matrix `W` with one row per base symbol defines, for a base
//! realization `ω`, the product measure
//! `μ_ω([x_0 ... x_{n-1}]) = Π_i W[ω_i, x_i]`. Averaging over the base gives
//! the marginal `μ`.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::base::{BaseKind, BaseProcess, BaseWindow};
use crate::error::{invalid, Error, Result};

const SUM_TOL: f64 = 1e-12;

/// A target word `y_0 ... y_{n-1}`; its cylinder is `C^n(y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    symbols: Vec<usize>,
}

impl Pattern {
    pub fn new(symbols: Vec<usize>, alphabet: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(invalid("pattern must have at least one symbol"));
        }
        if let Some(&bad) = symbols.iter().find(|&&a| a >= alphabet) {
            return Err(invalid(format!("pattern symbol {bad} out of range 0..{alphabet}")));
        }
        Ok(Self { symbols })
    }

    /// Parses a string of decimal digits, e.g. `"0110"`.
    pub fn parse(s: &str, alphabet: usize) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| invalid(format!("bad pattern symbol {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, alphabet)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.symbols.iter().all(|&a| a < 10) {
            self.symbols.iter().try_for_each(|a| write!(f, "{a}"))
        } else {
            let parts: Vec<String> = self.symbols.iter().map(|a| a.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// Fiber alphabet and the admissible transitions for each base symbol.
///
/// Only the full shift carries a constructed invariant measure; other
/// transition matrices are validated and stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomShiftSpec {
    fiber_alphabet_size: usize,
    transitions: BTreeMap<usize, Vec<Vec<u8>>>,
}

impl RandomShiftSpec {
    pub fn full_shift(b: usize) -> Result<Self> {
        if b < 2 {
            return Err(invalid("fiber alphabet must have at least 2 symbols"));
        }
        Ok(Self { fiber_alphabet_size: b, transitions: BTreeMap::new() })
    }

    /// Adds the 0/1 matrix used when the base symbol is `base_symbol`.
    /// Every row and every column needs a non-zero entry.
    pub fn with_transition(mut self, base_symbol: usize, matrix: Vec<Vec<u8>>) -> Result<Self> {
        let b = self.fiber_alphabet_size;
        if matrix.len() != b || matrix.iter().any(|r| r.len() != b) {
            return Err(invalid(format!("transition matrix for base symbol {base_symbol} must be {b}x{b}")));
        }
        if matrix.iter().flatten().any(|&e| e > 1) {
            return Err(invalid("transition matrix entries must be 0 or 1"));
        }
        if let Some(i) = (0..b).find(|&i| matrix[i].iter().all(|&e| e == 0)) {
            return Err(invalid(format!("row {i} of transition matrix for base symbol {base_symbol} is zero")));
        }
        if let Some(j) = (0..b).find(|&j| matrix.iter().all(|r| r[j] == 0)) {
            return Err(invalid(format!("column {j} of transition matrix for base symbol {base_symbol} is zero")));
        }
        self.transitions.insert(base_symbol, matrix);
        Ok(self)
    }

    pub fn fiber_alphabet_size(&self) -> usize {
        self.fiber_alphabet_size
    }

    /// Whether `i -> j` is allowed at a coordinate whose base symbol is `base_symbol`.
    pub fn allows(&self, base_symbol: usize, i: usize, j: usize) -> bool {
        self.transitions.get(&base_symbol).is_none_or(|m| m[i][j] == 1)
    }

    pub fn is_full_shift(&self) -> bool {
        self.transitions.values().all(|m| m.iter().flatten().all(|&e| e == 1))
    }
}

/// The random Bernoulli family defined by a row-stochastic matrix `W`
/// (rows indexed by base symbols, columns by fiber symbols).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMeasure {
    w: Vec<Vec<f64>>,
    q_max: f64,
}

impl FiberMeasure {
    pub fn new(w: Vec<Vec<f64>>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("W has no rows"));
        }
        let b = w[0].len();
        if b < 2 {
            return Err(invalid("fiber alphabet must have at least 2 symbols"));
        }
        for (i, row) in w.iter().enumerate() {
            if row.len() != b {
                return Err(invalid(format!("row {i} of W has length {} (expected {b})", row.len())));
            }
            if let Some((j, x)) = row.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x < 1.0)) {
                return Err(invalid(format!("W[{i}][{j}] = {x} not in (0,1)")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(invalid(format!("row {i} not stochastic (sums to {sum})")));
            }
        }
        let q_max = w.iter().flatten().copied().fold(0.0, f64::max);
        Ok(Self { w, q_max })
    }

    /// The two-symbol family with `W = [[p, 1-p], [1-p, p]]`.
    pub fn symmetric_pair(p: f64) -> Result<Self> {
        Self::new(vec![vec![p, 1.0 - p], vec![1.0 - p, p]])
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// Probability vector `p(ω) = W[ω_0, ·]`.
    pub fn row(&self, base_symbol: usize) -> &[f64] {
        &self.w[base_symbol]
    }

    pub fn base_alphabet_size(&self) -> usize {
        self.w.len()
    }

    pub fn fiber_alphabet_size(&self) -> usize {
        self.w[0].len()
    }

    /// Largest entry of `W`; every n-cylinder has `μ_ω`-measure at most `q_max^n`.
    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// Uniform cylinder decay rate `h0 = -ln q_max` (with constant `c = 1`).
    pub fn h0(&self) -> f64 {
        -self.q_max.ln()
    }

    /// Fiber entropy `-Σ_a P(a) Σ_j W[a,j] ln W[a,j]`.
    pub fn fiber_entropy(&self, proc: &BaseProcess) -> f64 {
        proc.stationary()
            .iter()
            .zip(&self.w)
            .map(|(pa, row)| -pa * row.iter().map(|w| w * w.ln()).sum::<f64>())
            .sum()
    }

    pub fn check_compatible(&self, proc: &BaseProcess) -> Result<()> {
        if proc.alphabet_size() != self.base_alphabet_size() {
            return Err(invalid(format!(
                "W has {} rows but the base alphabet has {} symbols",
                self.base_alphabet_size(),
                proc.alphabet_size()
            )));
        }
        Ok(())
    }

    fn check_pattern(&self, pat: &Pattern) -> Result<()> {
        let b = self.fiber_alphabet_size();
        if pat.symbols().iter().any(|&a| a >= b) {
            return Err(invalid(format!("pattern {pat} uses symbols outside 0..{b}")));
        }
        Ok(())
    }

    /// `μ_{θ^offset ω}(C^n(y)) = Π_i W[ω_{offset+i}, y_i]`.
    pub fn cylinder_measure(&self, window: &BaseWindow, pat: &Pattern, offset: usize) -> Result<f64> {
        self.check_pattern(pat)?;
        window.require(offset + pat.len())?;
        Ok(pat.symbols().iter().enumerate().map(|(i, &y)| self.w[window[offset + i]][y]).product())
    }

    /// `μ(C^n(y)) = ∫ μ_ω(C^n(y)) dP(ω)`, exact.
    pub fn marginal_cylinder_measure(&self, proc: &BaseProcess, pat: &Pattern) -> Result<f64> {
        self.check_compatible(proc)?;
        self.check_pattern(pat)?;
        let s = proc.alphabet_size();
        Ok(match proc.kind() {
            BaseKind::Bernoulli { weights } => pat
                .symbols()
                .iter()
                .map(|&y| (0..s).map(|a| weights[a] * self.w[a][y]).sum::<f64>())
                .product(),
            BaseKind::Markov { transition, stationary } => {
                let ys = pat.symbols();
                let mut v: Vec<f64> = (0..s).map(|a| stationary[a] * self.w[a][ys[0]]).collect();
                for &y in &ys[1..] {
                    v = (0..s)
                        .map(|b| (0..s).map(|a| v[a] * transition[a][b]).sum::<f64>() * self.w[b][y])
                        .collect();
                }
                v.iter().sum()
            }
        })
    }

    /// Density diagnostic for the symmetric two-symbol family over a fair-coin base:
    /// `μ_ω(C^n(x)) / μ(C^n(x)) = p^k q^(n-k) 2^n` with `k = #{i : ω_i = x_i}`.
    pub fn density_ratio(&self, proc: &BaseProcess, window: &BaseWindow, pat: &Pattern) -> Result<DensityRatio> {
        let fair = matches!(proc.kind(), BaseKind::Bernoulli { weights } if weights.len() == 2 && weights[0] == 0.5);
        let w = &self.w;
        let symmetric = w.len() == 2 && w[0].len() == 2 && w[0][0] == w[1][1] && w[0][1] == w[1][0];
        if !fair || !symmetric {
            return Err(Error::UnsupportedConfiguration(
                "density ratio needs a fair-coin base and W = [[p, 1-p], [1-p, p]]".into(),
            ));
        }
        self.check_pattern(pat)?;
        let n = pat.len();
        window.require(n)?;
        let p = w[0][0];
        let q = w[0][1];
        let matches = pat.symbols().iter().enumerate().filter(|&(i, &x)| window[i] == x).count();
        if p == q {
            return Ok(DensityRatio { matches, log_ratio: 0.0, ratio: 1.0, degenerate: true });
        }
        let log_ratio = matches as f64 * p.ln() + (n - matches) as f64 * q.ln() + n as f64 * std::f64::consts::LN_2;
        Ok(DensityRatio { matches, log_ratio, ratio: log_ratio.exp(), degenerate: false })
    }

    /// Draws `x_0 ... x_{length-1}` from `μ_ω`.
    pub fn sample_prefix<R: Rng + ?Sized>(&self, window: &BaseWindow, length: usize, rng: &mut R) -> Result<Vec<usize>> {
        window.require(length)?;
        let sampler = FiberSampler::new(self);
        Ok((0..length).map(|i| sampler.draw(window[i], rng)).collect())
    }

    /// Draws a pattern of length `n` from the marginal `μ`, by sampling a
    /// fresh base path and a fiber point over it.
    pub fn sample_marginal_pattern<R: Rng + ?Sized>(&self, proc: &BaseProcess, n: usize, rng: &mut R) -> Result<Pattern> {
        self.check_compatible(proc)?;
        let seed = rng.next_u64();
        let window = proc.sample_window(seed, n)?;
        let symbols = self.sample_prefix(&window, n, rng)?;
        Pattern::new(symbols, self.fiber_alphabet_size())
    }
}

/// Per-base-symbol categorical samplers for the rows of `W`.
#[derive(Debug, Clone)]
pub struct FiberSampler {
    rows: Vec<WeightedIndex<f64>>,
}

impl FiberSampler {
    pub fn new(fm: &FiberMeasure) -> Self {
        Self { rows: fm.w.iter().map(|r| WeightedIndex::new(r).expect("validated row")).collect() }
    }

    pub fn draw<R: Rng + ?Sized>(&self, base_symbol: usize, rng: &mut R) -> usize {
        self.rows[base_symbol].sample(rng)
    }
}

/// Result of [`FiberMeasure::density_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityRatio {
    /// Number of coordinates with `ω_i = x_i`.
    pub matches: usize,
    pub log_ratio: f64,
    pub ratio: f64,
    /// Set when `p = 1/2`, where every sample measure equals the marginal.
    pub degenerate: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn fair() -> BaseProcess {
        BaseProcess::bernoulli(vec![0.5, 0.5]).unwrap()
    }

    fn all_patterns(b: usize, n: usize) -> Vec<Pattern> {
        (0..b.pow(n as u32))
            .map(|mut c| {
                let mut w = vec![0; n];
                for slot in w.iter_mut().rev() {
                    *slot = c % b;
                    c /= b;
                }
                Pattern::new(w, b).unwrap()
            })
            .collect()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(FiberMeasure::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(FiberMeasure::new(vec![vec![1.0, 0.0]]).is_err());
        let e = FiberMeasure::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).unwrap_err();
        assert!(e.to_string().contains("row 0 not stochastic"));
    }

    #[test]
    fn example_cylinder_value() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let w = BaseWindow::from_symbols(&fair(), vec![0, 1]).unwrap();
        let v = fm.cylinder_measure(&w, &Pattern::parse("00", 2).unwrap(), 0).unwrap();
        assert!((v - 0.21).abs() < 1e-15);
        let total: f64 = all_patterns(2, 2).iter().map(|p| fm.cylinder_measure(&w, p, 0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(fm.cylinder_measure(&w, &Pattern::parse("1", 2).unwrap(), 0).unwrap(), 0.7);
        assert!(fm.cylinder_measure(&w, &Pattern::parse("000", 2).unwrap(), 0).is_err());
    }

    #[test]
    fn cylinders_sum_to_one_and_are_small() {
        let proc = BaseProcess::bernoulli(vec![0.2, 0.3, 0.5]).unwrap();
        let fm = FiberMeasure::new(vec![vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4], vec![0.25, 0.25, 0.5]]).unwrap();
        let w = proc.sample_window(11, 10).unwrap();
        for n in 1..=6 {
            let pats = all_patterns(3, n);
            let total: f64 = pats.iter().map(|p| fm.cylinder_measure(&w, p, 1).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let bound = fm.q_max().powi(n as i32);
            assert!(pats.iter().all(|p| fm.cylinder_measure(&w, p, 0).unwrap() <= bound));
        }
    }

    #[test]
    fn shift_equivariance() {
        let proc = fair();
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let w = proc.sample_window(4, 30).unwrap();
        let pat = Pattern::parse("01101", 2).unwrap();
        for k in 0..10 {
            let a = fm.cylinder_measure(&w, &pat, k).unwrap();
            let b = fm.cylinder_measure(&w.shifted(k).unwrap(), &pat, 0).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn marginal_of_symmetric_pair_is_uniform() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        for n in 1..=8 {
            for pat in all_patterns(2, n).iter().step_by(3) {
                let m = fm.marginal_cylinder_measure(&fair(), pat).unwrap();
                assert!((m - 0.5f64.powi(n as i32)).abs() < 1e-16);
            }
        }
        let proc = BaseProcess::bernoulli(vec![0.2, 0.8]).unwrap();
        let fm = FiberMeasure::new(vec![vec![0.1, 0.9], vec![0.6, 0.4]]).unwrap();
        let m = fm.marginal_cylinder_measure(&proc, &Pattern::parse("1", 2).unwrap()).unwrap();
        assert!((m - (0.2 * 0.9 + 0.8 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn markov_marginal_matches_monte_carlo() {
        let proc = BaseProcess::markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let pat = Pattern::parse("00", 2).unwrap();
        let exact = fm.marginal_cylinder_measure(&proc, &pat).unwrap();
        let trials = 100_000;
        let draws: Vec<f64> = (0..trials)
            .map(|i| {
                let w = proc.sample_window_from(rng::stream(17, i), 2).unwrap();
                fm.cylinder_measure(&w, &pat, 0).unwrap()
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / trials as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn density_ratio_cases() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let pat = Pattern::new(vec![1, 0, 0, 1, 1, 0, 1, 0], 2).unwrap();
        let w = BaseWindow::from_symbols(&fair(), pat.symbols().to_vec()).unwrap();
        let d = fm.density_ratio(&fair(), &w, &pat).unwrap();
        assert_eq!(d.matches, 8);
        assert!((d.ratio - 0.6f64.powi(8)).abs() < 1e-14);
        // agrees with the direct quotient of cylinder measures
        let direct = fm.cylinder_measure(&w, &pat, 0).unwrap() / fm.marginal_cylinder_measure(&fair(), &pat).unwrap();
        assert!((d.ratio - direct).abs() < 1e-12 * direct);

        let half = FiberMeasure::symmetric_pair(0.5).unwrap();
        let d = half.density_ratio(&fair(), &w, &pat).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.ratio, 1.0);

        let skew = BaseProcess::bernoulli(vec![0.4, 0.6]).unwrap();
        assert!(matches!(fm.density_ratio(&skew, &w, &pat), Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn fiber_prefix_frequencies() {
        let proc = fair();
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let n = 100_000;
        let w = proc.sample_window(21, n).unwrap();
        let mut r = rng::item_stream(21, 0, rng::lanes::FIBER);
        let x = fm.sample_prefix(&w, n, &mut r).unwrap();
        let at_zero: Vec<usize> = (0..n).filter(|&i| w[i] == 0).map(|i| x[i]).collect();
        let m = at_zero.len() as f64;
        let freq = at_zero.iter().filter(|&&a| a == 0).count() as f64 / m;
        assert!((freq - 0.3).abs() < 3.0 * (0.21 / m).sqrt());
        assert!(fm.sample_prefix(&w, 0, &mut r).unwrap().is_empty());
    }

    #[test]
    fn fiber_pattern_counts_match_marginal() {
        let proc = BaseProcess::markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        let pat = Pattern::parse("011", 2).unwrap();
        let exact = fm.marginal_cylinder_measure(&proc, &pat).unwrap();
        let trials = 50_000u64;
        let hits = (0..trials)
            .filter(|&i| {
                let w = proc.sample_window_from(rng::stream(8, i), 3).unwrap();
                let mut r = rng::item_stream(8, i, rng::lanes::FIBER);
                fm.sample_prefix(&w, 3, &mut r).unwrap() == pat.symbols()
            })
            .count() as f64;
        let freq = hits / trials as f64;
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((freq - exact).abs() < 3.0 * se);
    }

    #[test]
    fn shift_spec_validation() {
        let spec = RandomShiftSpec::full_shift(2).unwrap();
        assert!(spec.is_full_shift());
        assert!(spec.clone().with_transition(0, vec![vec![1, 0], vec![0, 0]]).is_err());
        assert!(spec.clone().with_transition(0, vec![vec![1, 0], vec![1, 0]]).is_err());
        let golden = spec.with_transition(1, vec![vec![1, 1], vec![1, 0]]).unwrap();
        assert!(!golden.allows(1, 1, 1));
        assert!(golden.allows(0, 1, 1));
        assert!(!golden.is_full_shift());
    }

    #[test]
    fn h0_and_entropy() {
        let fm = FiberMeasure::symmetric_pair(0.3).unwrap();
        assert!((fm.h0() - (-(0.7f64).ln())).abs() < 1e-15);
        let h = fm.fiber_entropy(&fair());
        assert!((h - 0.6108643020548935).abs() < 1e-12);
    }
}
