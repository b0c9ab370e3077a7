//! Comparison of observed survival curves with the exponential law and
//! finite-grid trend checks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The default comparison grid `t = 0, 0.1, ..., 5.0`.
pub fn default_t_grid() -> Vec<f64> {
    uniform_grid(0.0, 5.0, 0.1)
}

/// `start, start + step, ..., stop` with values rounded to 12 decimals.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

/// Sup-distance between an observed curve and `e^{-t}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub grid: Vec<f64>,
    pub observed: Vec<f64>,
    pub reference: Vec<f64>,
    pub sup_abs_err: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<Vec<f64>>,
}

impl CurveReport {
    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Self {
        self.stderr = Some(stderr);
        self
    }
}

/// Compares `observed[i]` with `e^{-t_grid[i]}`.
pub fn ks_to_exponential(observed: &[f64], t_grid: &[f64]) -> Result<CurveReport> {
    if t_grid.is_empty() {
        return Err(invalid("empty comparison grid"));
    }
    if observed.len() != t_grid.len() {
        return Err(invalid(format!("{} observed values for a grid of {}", observed.len(), t_grid.len())));
    }
    if let Some(v) = observed.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("observed value {v} outside [0,1]")));
    }
    let reference: Vec<f64> = t_grid.iter().map(|t| (-t).exp()).collect();
    let sup_abs_err = observed.iter().zip(&reference).map(|(o, r)| (o - r).abs()).fold(0.0, f64::max);
    Ok(CurveReport {
        grid: t_grid.to_vec(),
        observed: observed.to_vec(),
        reference,
        sup_abs_err,
        stderr: None,
    })
}

/// Monotonicity verdict and log-linear slope of a short sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub nonincreasing: bool,
    /// Least-squares slope of `ln(value)` against `x`; absent if any value is not positive.
    pub log_slope: Option<f64>,
    /// Successive differences `value[i+1] - value[i]`.
    pub steps: Vec<f64>,
}

/// Trend of `values` indexed by `xs` (e.g. pattern lengths or `-log10 r`).
pub fn trend_report(xs: &[f64], values: &[f64]) -> Result<TrendReport> {
    if values.len() < 3 {
        return Err(invalid(format!("trend needs at least 3 points, got {}", values.len())));
    }
    if xs.len() != values.len() {
        return Err(invalid("xs and values differ in length"));
    }
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0]);
    let steps = values.windows(2).map(|w| w[1] - w[0]).collect();
    let log_slope = if values.iter().all(|&v| v > 0.0) {
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let m = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / m;
        let my = ys.iter().sum::<f64>() / m;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(TrendReport { xs: xs.to_vec(), values: values.to_vec(), nonincreasing, log_slope, steps })
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = crate::compensated::sum(values.iter().copied()) / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = crate::compensated::sum(values.iter().map(|x| (x - mean).powi(2))) / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Dvoretzky–Kiefer–Wolfowitz half-width `sqrt(ln(2/α) / (2n))`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Sup-distance between the empirical CDF of `samples` and the uniform CDF on [0,1].
pub fn sup_distance_to_uniform(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_t_grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[50], 5.0);
    }

    #[test]
    fn exact_and_constant_curves() {
        let g = default_t_grid();
        let exact: Vec<f64> = g.iter().map(|t| (-t).exp()).collect();
        assert_eq!(ks_to_exponential(&exact, &g).unwrap().sup_abs_err, 0.0);
        let ones = vec![1.0; g.len()];
        let r = ks_to_exponential(&ones, &g).unwrap();
        assert!((r.sup_abs_err - (1.0 - (-5.0f64).exp())).abs() < 1e-15);
        assert!(ks_to_exponential(&[], &[]).is_err());
    }

    #[test]
    fn refinement_only_grows() {
        let coarse = [0.0, 1.0, 2.0];
        let fine = [0.0, 0.5, 1.0, 1.5, 2.0];
        let f = |t: f64| 1.0 / (1.0 + t);
        let a = ks_to_exponential(&coarse.map(f), &coarse).unwrap().sup_abs_err;
        let b = ks_to_exponential(&fine.map(f), &fine).unwrap().sup_abs_err;
        assert!(b >= a);
    }

    #[test]
    fn trends() {
        let t = trend_report(&[0.0, 1.0, 2.0], &[0.3, 0.2, 0.1]).unwrap();
        assert!(t.nonincreasing);
        assert!(t.log_slope.unwrap() < 0.0);
        assert!(trend_report(&[0.0, 1.0], &[0.1, 0.2]).is_err());
        let up = trend_report(&[0.0, 1.0, 2.0], &[0.1, 0.3, 0.2]).unwrap();
        assert!(!up.nonincreasing);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
