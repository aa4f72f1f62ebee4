use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Arithmetic mean and sample standard deviation (`n − 1` denominator; zero
/// for a single sample).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Outcome of a two-sided paired t-test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    pub significant: bool,
    /// Sign of `mean(a − b)`.
    pub direction: Ordering,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Paired t-test of `a` against `b` with `n − 1` degrees of freedom.
///
/// Differences with zero variance give `t = ±∞` (significant) unless their
/// mean is zero too, which gives `t = 0` (not significant).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "paired_t_test",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    if a.len() < 2 {
        return Err(Error::Eval("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&diffs);
    if !mean.is_finite() || !sd.is_finite() {
        return Err(Error::NonFinite("paired t-test samples".into()));
    }
    let df = diffs.len() - 1;
    let direction = mean.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    // relative to the sample magnitude, a spread at rounding level is no spread
    let magnitude = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if sd <= 1e-14 * magnitude || sd == 0.0 {
        let zero_mean = mean.abs() <= 1e-14 * magnitude || mean == 0.0;
        return Ok(TTest {
            t: if zero_mean { 0.0 } else { mean.signum() * f64::INFINITY },
            p_value: if zero_mean { 1.0 } else { 0.0 },
            df,
            significant: !zero_mean,
            direction: if zero_mean { Ordering::Equal } else { direction },
        });
    }
    let t = mean / (sd / (diffs.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Eval(e.to_string()))?;
    let p_value = 2.0 * dist.cdf(-t.abs());
    Ok(TTest {
        t,
        p_value,
        df,
        significant: p_value < SIGNIFICANCE_LEVEL,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.1, 0.5, 0.3];
        let t = paired_t_test(&a, &a).unwrap();
        assert_eq!(t.t, 0.0);
        assert!(!t.significant);
    }

    #[test]
    fn constant_shift() {
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let t = paired_t_test(&a, &b).unwrap();
        assert!(t.significant);
        assert_eq!(t.direction, Ordering::Greater);
        assert_eq!(t.t, f64::INFINITY);
    }

    #[test]
    fn reference_statistic() {
        // d = (-0.1, 0.1, -0.2, 0.2): mean 0, t = 0
        let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[1.1, 1.9, 3.2, 3.8]).unwrap();
        assert!(t.t.abs() < 1e-6);
        assert!((t.p_value - 1.0).abs() < 1e-6);
        // d = (1, 2, 3): mean 2, sd 1, t = 2 sqrt(3)
        let t = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((t.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        // two-sided p for t = 3.4641 with 2 df is 0.07418
        assert!((t.p_value - 0.074_180_1).abs() < 1e-6);
        assert!(!t.significant);
    }

    #[test]
    fn rejects_short_or_unpaired() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
