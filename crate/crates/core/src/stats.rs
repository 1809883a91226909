//! Percentiles and empirical CDFs for EE samples.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("sample set contains a non-finite value")]
    NonFinite,
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `q`-th percentile (`q` in `[0, 100]`), linear interpolation between order
/// statistics at rank `q/100 · (n - 1)`.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64, StatsError> {
    let s = sorted(samples)?;
    Ok(percentile_sorted(&s, q))
}

fn percentile_sorted(s: &[f64], q: f64) -> f64 {
    let rank = q.clamp(0.0, 100.0) / 100.0 * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let frac = rank - lo as f64;
    s[lo] + (s[hi] - s[lo]) * frac
}

/// The value exceeded with probability 0.95: the 5th percentile.
pub fn percentile_95_likely(samples: &[f64]) -> Result<f64, StatsError> {
    percentile(samples, 5.0)
}

pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    percentile(samples, 50.0)
}

pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Empirical CDF as `(value, probability)` pairs: the i-th smallest sample
/// (0-based) maps to `(i + 1) / n`.
pub fn cdf_points(samples: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    let s = sorted(samples)?;
    let n = s.len() as f64;
    Ok(s.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_hundred() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile_95_likely(&s).unwrap() - 5.95).abs() < 1e-12);
        assert!((median(&s).unwrap() - 50.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sets() {
        assert_eq!(percentile_95_likely(&[3.5; 7]).unwrap(), 3.5);
        assert_eq!(percentile_95_likely(&[2.0]).unwrap(), 2.0);
        assert_eq!(percentile_95_likely(&[]), Err(StatsError::Empty));
        assert_eq!(percentile(&[1.0, f64::NAN], 5.0), Err(StatsError::NonFinite));
    }

    #[test]
    fn order_does_not_matter() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 25.0).unwrap(), 1.75);
    }

    #[test]
    fn cdf_is_monotone_to_one() {
        let pts = cdf_points(&[0.3, 0.1, 0.2, 0.2]).unwrap();
        assert_eq!(pts.last().unwrap().1, 1.0);
        for w in pts.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert_eq!(pts[0], (0.1, 0.25));
    }
}
