//! The driving process: an i.i.d. or stationary Markov symbol stream on
//! `{0, ..., s}` together with the left shift.
//!
//! A realization of the base is only ever needed on coordinates `0, 1, 2, ...`
//! so it is represented by a [`BaseWindow`] that grows to the right on demand.

use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, StreamRng};

const SUM_TOL: f64 = 1e-12;

/// Largest `(s+1)^(n+m)` enumeration accepted by [`BaseProcess::psi_mixing_coefficient`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub enum BaseKind {
    Bernoulli { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>>, stationary: Vec<f64> },
}

/// Law of the base symbol stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseProcess {
    kind: BaseKind,
}

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.len() < 2 {
        return Err(invalid(format!("{what}: alphabet must have at least 2 symbols")));
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x < 1.0)) {
        return Err(invalid(format!("{what}: entry {i} = {x} not in (0,1)")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(invalid(format!("{what}: entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Solves `pi Q = pi`, `sum(pi) = 1` by Gaussian elimination with partial pivoting.
fn stationary_vector(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = q.len();
    // Rows of (Q^T - I), last row replaced by the normalisation.
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| q[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(invalid("transition matrix has no unique stationary vector"));
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Ok((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

impl BaseProcess {
    /// I.i.d. symbols with the given weights; every weight must lie in (0,1).
    pub fn bernoulli(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector(&weights, "base weights")?;
        Ok(Self { kind: BaseKind::Bernoulli { weights } })
    }

    /// Stationary Markov chain with transition matrix `transition`.
    ///
    /// The stationary vector is solved for and checked against `pi Q = pi`.
    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = transition.len();
        for (i, row) in transition.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!("transition row {i} has length {} (expected {k})", row.len())));
            }
            check_probability_vector(row, &format!("transition row {i}"))?;
        }
        if k < 2 {
            return Err(invalid("base alphabet must have at least 2 symbols"));
        }
        let stationary = stationary_vector(&transition)?;
        for j in 0..k {
            let lhs: f64 = (0..k).map(|i| stationary[i] * transition[i][j]).sum();
            if (lhs - stationary[j]).abs() > SUM_TOL {
                return Err(invalid(format!("stationary vector check failed at {j}")));
            }
        }
        Ok(Self { kind: BaseKind::Markov { transition, stationary } })
    }

    pub fn kind(&self) -> &BaseKind {
        &self.kind
    }

    pub fn alphabet_size(&self) -> usize {
        match &self.kind {
            BaseKind::Bernoulli { weights } => weights.len(),
            BaseKind::Markov { stationary, .. } => stationary.len(),
        }
    }

    /// One-dimensional marginal (the weights, or the stationary vector).
    pub fn stationary(&self) -> &[f64] {
        match &self.kind {
            BaseKind::Bernoulli { weights } => weights,
            BaseKind::Markov { stationary, .. } => stationary,
        }
    }

    /// One-step transition probability `P(next = j | current = i)`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            BaseKind::Bernoulli { weights } => weights[j],
            BaseKind::Markov { transition, .. } => transition[i][j],
        }
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self.kind, BaseKind::Bernoulli { .. })
    }

    fn check_word(&self, word: &[usize]) -> Result<()> {
        if word.is_empty() {
            return Err(invalid("empty base word"));
        }
        let s = self.alphabet_size();
        if let Some(&bad) = word.iter().find(|&&a| a >= s) {
            return Err(invalid(format!("base symbol {bad} out of range 0..{s}")));
        }
        Ok(())
    }

    /// Probability of the base cylinder `[w_0 ... w_{n-1}]`.
    pub fn cylinder_prob(&self, word: &[usize]) -> Result<f64> {
        self.check_word(word)?;
        Ok(match &self.kind {
            BaseKind::Bernoulli { weights } => word.iter().map(|&a| weights[a]).product(),
            BaseKind::Markov { transition, stationary } => {
                stationary[word[0]] * word.windows(2).map(|p| transition[p[0]][p[1]]).product::<f64>()
            }
        })
    }

    /// `steps`-step transition matrix.
    pub fn transition_power(&self, steps: usize) -> Vec<Vec<f64>> {
        let k = self.alphabet_size();
        let mut acc: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        for _ in 0..steps {
            acc = (0..k)
                .map(|i| (0..k).map(|j| (0..k).map(|l| acc[i][l] * self.transition(l, j)).sum()).collect())
                .collect();
        }
        acc
    }

    /// Exact finite-rank psi-mixing coefficient
    /// `max_{U,V} |P(U ∩ θ^{-n-gap} V) / (P(U) P(V)) - 1|` over rank-`n` cylinders
    /// `U` and rank-`m` cylinders `V`.
    ///
    /// For a Markov law the ratio for a pair of cylinders collapses to
    /// `Q^{gap+1}(u_{n-1}, v_0) / pi(v_0)`; every symbol pair occurs because all
    /// transition entries are positive, so the max runs over the bridge matrix.
    pub fn psi_mixing_coefficient(&self, gap: usize, n: usize, m: usize) -> Result<f64> {
        self.psi_mixing_coefficient_capped(gap, n, m, DEFAULT_ENUMERATION_CAP)
    }

    pub fn psi_mixing_coefficient_capped(&self, gap: usize, n: usize, m: usize, cap: u64) -> Result<f64> {
        if n == 0 || m == 0 {
            return Err(invalid("cylinder ranks must be at least 1"));
        }
        let s = self.alphabet_size() as u64;
        let size = s.checked_pow((n + m) as u32).filter(|&z| z <= cap);
        if size.is_none() {
            return Err(Error::ResourceLimit(format!(
                "psi enumeration over {s}^{} cylinder pairs exceeds cap {cap}",
                n + m
            )));
        }
        match &self.kind {
            BaseKind::Bernoulli { .. } => Ok(0.0),
            BaseKind::Markov { stationary, .. } => {
                let bridge = self.transition_power(gap + 1);
                let worst = bridge
                    .iter()
                    .flat_map(|row| row.iter().zip(stationary).map(|(b, pi)| (b / pi - 1.0).abs()))
                    .fold(0.0, f64::max);
                Ok(worst)
            }
        }
    }

    /// Draws a window of `length` coordinates from stream 0 of `seed`.
    pub fn sample_window(&self, seed: u64, length: usize) -> Result<BaseWindow> {
        self.sample_window_from(rng::stream(seed, 0), length)
    }

    /// Draws a window from an explicit generator.
    pub fn sample_window_from(&self, rng: StreamRng, length: usize) -> Result<BaseWindow> {
        if length == 0 {
            return Err(invalid("window length must be at least 1"));
        }
        let mut w = BaseWindow::new(self.clone(), rng);
        w.extend_to(length);
        Ok(w)
    }
}

/// A finite, right-extendable realization `ω_start, ω_{start+1}, ...` of the base.
#[derive(Debug, Clone)]
pub struct BaseWindow {
    start_index: usize,
    symbols: Vec<usize>,
    law: BaseProcess,
    samplers: Vec<WeightedIndex<f64>>,
    rng: StreamRng,
}

impl BaseWindow {
    fn new(law: BaseProcess, rng: StreamRng) -> Self {
        let k = law.alphabet_size();
        let samplers = match &law.kind {
            BaseKind::Bernoulli { weights } => vec![WeightedIndex::new(weights).expect("validated weights")],
            BaseKind::Markov { transition, stationary } => std::iter::once(stationary)
                .chain(transition.iter().take(k))
                .map(|w| WeightedIndex::new(w).expect("validated weights"))
                .collect(),
        };
        Self { start_index: 0, symbols: Vec::new(), law, samplers, rng }
    }

    /// Builds a window from explicit symbols. It cannot be extended past its end.
    pub fn from_symbols(law: &BaseProcess, symbols: Vec<usize>) -> Result<Self> {
        law.check_word(&symbols)?;
        let mut w = Self::new(law.clone(), rng::stream(0, u64::MAX));
        w.symbols = symbols;
        // Marks the window as fixed: extension past the end is refused.
        w.samplers.clear();
        Ok(w)
    }

    pub fn start_index(&self) -> usize {
        self.start_index
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

    pub fn law(&self) -> &BaseProcess {
        &self.law
    }

    /// Whether the window can draw further symbols.
    pub fn is_extendable(&self) -> bool {
        !self.samplers.is_empty()
    }

    /// Extends the realization so that it covers at least `len` coordinates.
    /// Draws are sequential, so the result does not depend on how the
    /// extension is chunked. Fixed windows are left untouched.
    pub fn extend_to(&mut self, len: usize) {
        if !self.is_extendable() {
            return;
        }
        while self.symbols.len() < len {
            let next = match (&self.law.kind, self.symbols.last()) {
                (BaseKind::Bernoulli { .. }, _) => self.samplers[0].sample(&mut self.rng),
                (BaseKind::Markov { .. }, None) => self.samplers[0].sample(&mut self.rng),
                (BaseKind::Markov { .. }, Some(&prev)) => self.samplers[prev + 1].sample(&mut self.rng),
            };
            self.symbols.push(next);
        }
    }

    /// Errors unless coordinates `0..len` are present.
    pub fn require(&self, len: usize) -> Result<()> {
        if self.symbols.len() < len {
            return Err(invalid(format!(
                "window too short: covers {} coordinates, {len} required",
                self.symbols.len()
            )));
        }
        Ok(())
    }

    /// The realization of `θ^k ω`.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        self.require(k)?;
        let mut w = self.clone();
        w.symbols.drain(..k);
        w.start_index += k;
        Ok(w)
    }
}

impl std::ops::Index<usize> for BaseWindow {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.symbols[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn markov_example() -> BaseProcess {
        BaseProcess::markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn words(alphabet: usize, len: usize) -> Vec<Vec<usize>> {
        (0..alphabet.pow(len as u32))
            .map(|mut c| {
                let mut w = vec![0; len];
                for slot in w.iter_mut().rev() {
                    *slot = c % alphabet;
                    c /= alphabet;
                }
                w
            })
            .collect()
    }

    #[test]
    fn sample_window_shape() {
        let p = BaseProcess::bernoulli(vec![0.5, 0.5]).unwrap();
        let w = p.sample_window(1, 8).unwrap();
        assert_eq!(w.len(), 8);
        assert!(w.symbols().iter().all(|&a| a < 2));
        assert!(p.sample_window(1, 0).is_err());
    }

    #[test]
    fn degenerate_weights_rejected() {
        assert!(BaseProcess::bernoulli(vec![1.0, 0.0]).is_err());
        assert!(BaseProcess::bernoulli(vec![0.5, 0.6]).is_err());
        assert!(BaseProcess::markov(vec![vec![1.0, 0.0], vec![0.2, 0.8]]).is_err());
    }

    #[test]
    fn markov_stationary_vector() {
        let pi = markov_example().stationary().to_vec();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn markov_frequency_within_clt_band() {
        let p = markov_example();
        let n = 100_000;
        let w = p.sample_window(7, n).unwrap();
        let freq0 = w.symbols().iter().filter(|&&a| a == 0).count() as f64 / n as f64;
        // Asymptotic variance of the occupation frequency of a two-state chain
        // with second eigenvalue lambda = 1 - Q01 - Q10.
        let pi0 = 2.0 / 3.0;
        let lambda: f64 = 1.0 - 0.1 - 0.2;
        let var = pi0 * (1.0 - pi0) * (1.0 + lambda) / (1.0 - lambda) / n as f64;
        assert!((freq0 - pi0).abs() < 3.0 * var.sqrt(), "freq {freq0}");
    }

    #[test]
    fn extension_is_chunking_invariant() {
        let p = markov_example();
        let a = p.sample_window(3, 1000).unwrap();
        let mut b = p.sample_window(3, 10).unwrap();
        for len in [11, 200, 999, 1000] {
            b.extend_to(len);
        }
        assert_eq!(a.symbols(), b.symbols());
    }

    #[test]
    fn cylinder_probabilities() {
        let b = BaseProcess::bernoulli(vec![0.5, 0.5]).unwrap();
        assert_eq!(b.cylinder_prob(&[0, 1]).unwrap(), 0.25);
        let b = BaseProcess::bernoulli(vec![0.3, 0.7]).unwrap();
        assert_eq!(b.cylinder_prob(&[1]).unwrap(), 0.7);
        let m = markov_example();
        assert!((m.cylinder_prob(&[0, 1]).unwrap() - 2.0 / 3.0 * 0.1).abs() < 1e-15);
        assert!(m.cylinder_prob(&[2]).is_err());
        assert!(m.cylinder_prob(&[]).is_err());
    }

    #[test]
    fn cylinder_probabilities_sum_to_one() {
        let laws = [
            markov_example(),
            BaseProcess::bernoulli(vec![0.2, 0.3, 0.5]).unwrap(),
            BaseProcess::markov(vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4]]).unwrap(),
        ];
        for law in &laws {
            for n in 1..=6 {
                let total: f64 = words(law.alphabet_size(), n).iter().map(|w| law.cylinder_prob(w).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    /// Brute force: ratio of the joint cylinder probability to the product,
    /// built from explicit word products and a matrix-power bridge.
    fn psi_by_enumeration(p: &BaseProcess, gap: usize, n: usize, m: usize) -> f64 {
        let s = p.alphabet_size();
        let bridge = p.transition_power(gap + 1);
        let mut worst: f64 = 0.0;
        for u in words(s, n) {
            for v in words(s, m) {
                let pu = p.cylinder_prob(&u).unwrap();
                let pv = p.cylinder_prob(&v).unwrap();
                let tail: f64 = v.windows(2).map(|x| p.transition(x[0], x[1])).product();
                let joint = pu * bridge[u[n - 1]][v[0]] * tail;
                worst = worst.max((joint / (pu * pv) - 1.0).abs());
            }
        }
        worst
    }

    #[test]
    fn psi_bernoulli_is_zero() {
        let b = BaseProcess::bernoulli(vec![0.3, 0.7]).unwrap();
        for gap in [0, 1, 5] {
            assert_eq!(b.psi_mixing_coefficient(gap, 2, 2).unwrap(), 0.0);
        }
    }

    #[test]
    fn psi_markov_gap_zero_closed_form() {
        let m = markov_example();
        let pi = [2.0 / 3.0, 1.0 / 3.0];
        let q = [[0.9, 0.1], [0.2, 0.8]];
        let mut closed: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                closed = closed.max((q[i][j] / pi[j] - 1.0_f64).abs());
            }
        }
        let got = m.psi_mixing_coefficient(0, 1, 1).unwrap();
        assert!((got - closed).abs() < 1e-14);
        assert!((got - psi_by_enumeration(&m, 0, 1, 1)).abs() < 1e-12);
    }

    #[test]
    fn psi_matches_enumeration_and_decays() {
        let m = markov_example();
        for (n, mm) in [(1, 2), (3, 2), (2, 4)] {
            for gap in [0, 3, 7] {
                let a = m.psi_mixing_coefficient(gap, n, mm).unwrap();
                assert!((a - psi_by_enumeration(&m, gap, n, mm)).abs() < 1e-12);
            }
        }
        let psi: Vec<f64> = (0..=30).map(|g| m.psi_mixing_coefficient(g, 1, 1).unwrap()).collect();
        assert!(psi.windows(2).all(|w| w[1] <= w[0]));
        // second eigenvalue 0.7: psi(20) <= psi(0) * 0.7^20 up to the constant
        let bound = psi[0] * 0.7f64.powi(20) * 2.0;
        assert!(psi[20] <= bound, "{} vs {bound}", psi[20]);
    }

    #[test]
    fn psi_enumeration_cap() {
        let m = markov_example();
        assert!(matches!(m.psi_mixing_coefficient_capped(0, 6, 6, 1000), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn shifted_window() {
        let p = markov_example();
        let w = p.sample_window(5, 20).unwrap();
        let s = w.shifted(4).unwrap();
        assert_eq!(s.start_index(), 4);
        assert_eq!(s.symbols(), &w.symbols()[4..]);
    }
}
