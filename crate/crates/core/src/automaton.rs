//! Occurrence automaton for a single pattern, built from the failure function.
//!
//! State `i` is the length of the longest suffix of the text read so far that
//! is a prefix of the pattern; state `n` means an occurrence just ended. The
//! row of state `n` continues from the pattern's longest proper border, so
//! overlapping occurrences are never skipped.

use crate::fiber::Pattern;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternAutomaton {
    pattern: Pattern,
    alphabet: usize,
    /// `failure[i]` = longest proper border of `pattern[..i]`, for `i` in `0..=n`.
    failure: Vec<usize>,
    /// Row-major `(n + 1) x alphabet` transition table.
    table: Vec<usize>,
}

impl PatternAutomaton {
    /// Builds the automaton in `O(n * alphabet)`.
    pub fn new(pattern: &Pattern, alphabet: usize) -> Self {
        let y = pattern.symbols();
        let n = y.len();
        assert!(y.iter().all(|&a| a < alphabet), "pattern symbol outside alphabet");

        let mut failure = vec![0usize; n + 1];
        let mut k = 0;
        for i in 1..n {
            while k > 0 && y[i] != y[k] {
                k = failure[k];
            }
            if y[i] == y[k] {
                k += 1;
            }
            failure[i + 1] = k;
        }

        let mut table = vec![0usize; (n + 1) * alphabet];
        for state in 0..=n {
            for a in 0..alphabet {
                table[state * alphabet + a] = if state < n && y[state] == a {
                    state + 1
                } else if state == 0 {
                    0
                } else {
                    // failure[state] < state, so that row is already filled
                    table[failure[state] * alphabet + a]
                };
            }
        }
        Self { pattern: pattern.clone(), alphabet, failure, table }
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Number of the accepting state (the pattern length).
    pub fn accepting(&self) -> usize {
        self.pattern.len()
    }

    /// Longest proper border of the whole pattern: where reading resumes after
    /// an occurrence.
    pub fn border(&self) -> usize {
        self.failure[self.pattern.len()]
    }

    pub fn failure(&self) -> &[usize] {
        &self.failure
    }

    #[inline]
    pub fn next(&self, state: usize, symbol: usize) -> usize {
        self.table[state * self.alphabet + symbol]
    }

    /// State reached from `state` after reading `word`.
    pub fn run(&self, state: usize, word: &[usize]) -> usize {
        word.iter().fold(state, |s, &a| self.next(s, a))
    }

    /// End positions (inclusive, 0-based) of all occurrences in `text`.
    pub fn occurrence_ends(&self, text: &[usize]) -> Vec<usize> {
        let n = self.accepting();
        let mut state = 0;
        let mut ends = Vec::new();
        for (m, &a) in text.iter().enumerate() {
            state = self.next(state, a);
            if state == n {
                ends.push(m);
            }
        }
        ends
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(b: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
        (0..b.pow(len as u32)).map(move |mut c| {
            let mut w = vec![0; len];
            for slot in w.iter_mut().rev() {
                *slot = c % b;
                c /= b;
            }
            w
        })
    }

    #[test]
    fn small_tables() {
        let a = PatternAutomaton::new(&Pattern::parse("00", 2).unwrap(), 2);
        assert_eq!(a.next(1, 0), 2);
        assert_eq!(a.next(1, 1), 0);
        assert_eq!(a.border(), 1);
        let a = PatternAutomaton::new(&Pattern::parse("01", 2).unwrap(), 2);
        assert_eq!(a.next(1, 0), 1);
        assert_eq!(a.next(1, 1), 2);
        assert_eq!(a.border(), 0);
        let a = PatternAutomaton::new(&Pattern::parse("abab".replace('a', "0").replace('b', "1").as_str(), 2).unwrap(), 2);
        assert_eq!(a.failure(), &[0, 0, 0, 1, 2]);
    }

    #[test]
    fn forward_edges_and_full_reads() {
        for b in 2..=3 {
            for n in 1..=4 {
                for y in words(b, n) {
                    let pat = Pattern::new(y.clone(), b).unwrap();
                    let a = PatternAutomaton::new(&pat, b);
                    for i in 0..n {
                        assert_eq!(a.next(i, y[i]), i + 1);
                    }
                    for s in 0..n {
                        assert_eq!(a.run(s, &y), n, "state {s} pattern {pat}");
                    }
                }
            }
        }
    }

    #[test]
    fn occurrences_match_naive_scan() {
        for b in 2..=3 {
            for n in 1..=3 {
                for y in words(b, n) {
                    let a = PatternAutomaton::new(&Pattern::new(y.clone(), b).unwrap(), b);
                    for len in 0..=8 {
                        if b == 3 && len > 6 {
                            continue;
                        }
                        for text in words(b, len) {
                            let naive: Vec<usize> = (0..len)
                                .filter(|&m| m + 1 >= n && text[m + 1 - n..=m] == y[..])
                                .collect();
                            assert_eq!(a.occurrence_ends(&text), naive);
                        }
                    }
                }
            }
        }
    }
}
