use hitlab::circle::{random_orbit, RationalPoint};
use hitlab::expt::ExperimentConfig;
use hitlab::ledger::verify_sandwich;
use hitlab::survival::SurvivalEngine;
use hitlab::{BaseProcess, BaseWindow, FiberMeasure, Pattern};
use proptest::prelude::*;

fn stochastic_row(b: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, b).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let head: f64 = row[..row.len() - 1].iter().sum();
        *row.last_mut().unwrap() = 1.0 - head;
        row
    })
}

/// A fiber measure over a two-symbol base, a fixed window and a pattern.
fn shift_case() -> impl Strategy<Value = (FiberMeasure, BaseWindow, Pattern)> {
    (2usize..=3, 1usize..=5).prop_flat_map(|(b, n)| {
        (
            prop::collection::vec(stochastic_row(b), 2),
            prop::collection::vec(0usize..2, 80),
            prop::collection::vec(0..b, n),
        )
            .prop_map(move |(w, symbols, y)| {
                let proc = BaseProcess::bernoulli(vec![0.5, 0.5]).unwrap();
                (
                    FiberMeasure::new(w).unwrap(),
                    BaseWindow::from_symbols(&proc, symbols).unwrap(),
                    Pattern::new(y, b).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn survival_is_a_tail_probability((fm, window, pat) in shift_case(), offset in 0usize..10) {
        let s = SurvivalEngine::new(&fm, &pat).unwrap().survival(&window, offset, 40).unwrap();
        prop_assert_eq!(s[0], 1.0);
        for w in s.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
            prop_assert!(w[1] >= 0.0);
        }
    }

    #[test]
    fn return_curve_starts_at_cylinder_mass((fm, window, pat) in shift_case(), offset in 0usize..10) {
        let engine = SurvivalEngine::new(&fm, &pat).unwrap();
        let r = engine.return_survival(&window, offset, 30).unwrap();
        let mass = fm.cylinder_measure(&window, &pat, offset).unwrap();
        prop_assert!((r[0] - mass).abs() <= 1e-15 * mass.max(1.0));
        for w in r.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn offset_equals_shifted_window((fm, window, pat) in shift_case(), offset in 0usize..10) {
        let engine = SurvivalEngine::new(&fm, &pat).unwrap();
        let direct = engine.survival(&window, offset, 30).unwrap();
        let shifted = engine.survival(&window.shifted(offset).unwrap(), 0, 30).unwrap();
        prop_assert_eq!(direct, shifted);
    }

    #[test]
    fn product_identity_matches_pinning((fm, window, pat) in shift_case(), offset in 0usize..5, extra in 0usize..4) {
        let engine = SurvivalEngine::new(&fm, &pat).unwrap();
        let gap = pat.len() - 1 + extra;
        if gap == 0 {
            return Ok(());
        }
        let product = engine.shifted_joint(&window, offset, gap, 20).unwrap();
        let pinned = engine.shifted_joint_by_pinning(&window, offset, gap, 20).unwrap();
        for (a, b) in product.iter().zip(&pinned) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn marginal_cylinders_sum_to_one(w in prop::collection::vec(stochastic_row(3), 2), n in 1usize..=4) {
        let proc = BaseProcess::bernoulli(vec![0.3, 0.7]).unwrap();
        let fm = FiberMeasure::new(w).unwrap();
        let mut total = 0.0;
        for code in 0..3usize.pow(n as u32) {
            let y: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
            total += fm.marginal_cylinder_measure(&proc, &Pattern::new(y, 3).unwrap()).unwrap();
        }
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sandwich_holds(eps in 0.001f64..=0.5, xs in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let xs: Vec<f64> = xs.iter().map(|x| x * eps).collect();
        prop_assert!(verify_sandwich(&xs, eps).unwrap().pass);
    }

    #[test]
    fn rational_orbits_stay_on_their_denominator(den in 2u64..1 << 40, frac in 0.0f64..1.0, bits in prop::collection::vec(0usize..2, 64)) {
        let rds = hitlab::circle::CircleRDS::doubling_tripling();
        let num = ((den as f64 * frac) as u64).min(den - 1);
        for p in random_orbit(&rds, &bits, RationalPoint::new(num, den).unwrap(), 64).unwrap() {
            prop_assert_eq!(p.den(), den);
            prop_assert!(p.num() < den);
        }
    }

    #[test]
    fn config_hash_ignores_threads_and_out(threads in 1usize..64) {
        let text = "kind = \"quenched_shift\"\nseeds = [1]\n[fiber]\nw = [[0.3, 0.7], [0.7, 0.3]]\n[sweep]\nn = [6]\n";
        let a = ExperimentConfig::from_toml_str(text).unwrap();
        let mut b = a.clone();
        b.threads = Some(threads);
        b.out = Some("elsewhere".into());
        prop_assert_eq!(a.hash(), b.hash());
    }
}
