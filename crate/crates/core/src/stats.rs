//! Empirical error distributions.
//!
//! Percentiles use linear interpolation between the closest order statistics:
//! for `n` ascending samples `s[0..n]` and `p ∈ [0, 100]`, the rank is
//! `h = (n - 1) · p / 100` and the value `s[⌊h⌋] + (h - ⌊h⌋) · (s[⌊h⌋ + 1] - s[⌊h⌋])`.
//! `p = 0` gives the minimum and `p = 100` the maximum.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    sorted: Vec<f64>,
    mean: f64,
}

impl ErrorReport {
    /// Sorts the samples. Fails on an empty set or on NaN samples.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("no samples to summarize"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Argument("NaN sample"));
        }
        samples.sort_by(f64::total_cmp);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Self {
            sorted: samples,
            mean,
        })
    }

    pub fn sorted_errors(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().expect("non-empty by construction")
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    /// Interpolated percentile; `p` is clamped to `[0, 100]`.
    pub fn percentile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let h = (n - 1) as f64 * p.clamp(0.0, 100.0) / 100.0;
        let lo = libm::floor(h) as usize;
        if lo + 1 >= n {
            return self.sorted[n - 1];
        }
        let frac = h - lo as f64;
        self.sorted[lo] + frac * (self.sorted[lo + 1] - self.sorted[lo])
    }

    /// Fraction of samples `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|v| *v <= x);
        count as f64 / self.sorted.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn interpolated_p90_of_tenths() {
        let r = ErrorReport::from_samples((1..=10).map(|i| i as f64 / 10.0).collect()).unwrap();
        // h = 9 · 0.9 = 8.1 → 0.9 + 0.1 · (1.0 − 0.9)
        assert!((r.percentile(90.0) - 0.91).abs() < 1e-12);
        assert_eq!(r.percentile(100.0), 1.0);
        assert_eq!(r.percentile(0.0), 0.1);
        assert!((r.mean() - 0.55).abs() < 1e-12);
        assert_eq!(r.max(), 1.0);
    }

    #[test]
    fn single_sample() {
        let r = ErrorReport::from_samples(vec![0.5]).unwrap();
        for p in [0.0, 1.0, 50.0, 68.3, 99.7, 100.0] {
            assert_eq!(r.percentile(p), 0.5);
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(ErrorReport::from_samples(Vec::new()).is_err());
        assert!(ErrorReport::from_samples(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sorts_and_counts() {
        let r = ErrorReport::from_samples(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.sorted_errors(), [1.0, 2.0, 2.0, 3.0]);
        assert_eq!(r.cdf_at(2.0), 0.75);
        assert_eq!(r.cdf_at(0.5), 0.0);
    }
}
