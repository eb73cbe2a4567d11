use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{Purpose, RandomnessContract};
use crate::sum::{pairwise_mean, pairwise_sum_by};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

pub fn mean(values: &[f64]) -> f64 {
    pairwise_mean(values)
}

/// Sample standard deviation (divisor `n - 1`); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = pairwise_sum_by(values.len(), |i| (values[i] - m) * (values[i] - m));
    math::sqrt(ss / (values.len() - 1) as f64)
}

/// Sample covariance of paired values (divisor `n - 1`).
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(&a[..n]), mean(&b[..n]));
    pairwise_sum_by(n, |i| (a[i] - ma) * (b[i] - mb)) / (n - 1) as f64
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::CountMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Empty("slope fit needs two points"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = pairwise_sum_by(x.len(), |i| (x[i] - mx) * (x[i] - mx));
    let sxy = pairwise_sum_by(x.len(), |i| (x[i] - mx) * (y[i] - my));
    if sxx == 0.0 {
        return Err(Error::Empty("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

/// Slope of `ln y` against `ln x`; `None` if any `y` is not positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if y.iter().chain(x).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|&v| math::ln(v)).collect();
    let ly: Vec<f64> = y.iter().map(|&v| math::ln(v)).collect();
    slope(&lx, &ly).ok()
}

/// A point estimate with its bootstrap standard error and percentile 95%
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0, lo: value, hi: value }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Percentile bootstrap over `n` units: each resample draws `n` unit indices
/// with replacement and evaluates `stat` on them. `index` separates the
/// bootstrap streams of different statistics under one contract.
pub fn bootstrap<F: FnMut(&[usize]) -> f64>(n: usize, contract: RandomnessContract, index: u64, mut stat: F) -> Estimate {
    let all: Vec<usize> = (0..n).collect();
    let value = stat(&all);
    if n < 2 {
        return Estimate::exact(value);
    }
    let mut rng = contract.rng_indexed(Purpose::Bootstrap, index);
    let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut idx = alloc::vec![0usize; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let v = stat(&idx);
        if v.is_finite() {
            draws.push(v);
        }
    }
    if draws.len() < 2 {
        return Estimate { value, se: f64::NAN, lo: f64::NAN, hi: f64::NAN };
    }
    let se = std_dev(&draws);
    draws.sort_by(f64::total_cmp);
    Estimate { value, se, lo: quantile_sorted(&draws, 0.025), hi: quantile_sorted(&draws, 0.975) }
}

/// Bootstrap of the mean of `values`.
pub fn bootstrap_mean(values: &[f64], contract: RandomnessContract, index: u64) -> Estimate {
    bootstrap(values.len(), contract, index, |idx| pairwise_sum_by(idx.len(), |i| values[idx[i]]) / idx.len() as f64)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn moments() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((std_dev(&v) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((covariance(&v, &[2.0, 4.0, 6.0, 8.0]) - 10.0 / 3.0).abs() < 1e-14);
        assert_eq!(std_dev(&[7.0]), 0.0);
    }

    #[test]
    fn slopes() {
        let x = [100.0, 400.0, 1600.0];
        let y: Vec<f64> = x.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&x, &[1.0, 0.0, 1.0]), None);
        assert!(slope(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn bootstrap_mean_matches_standard_error() {
        let mut rng = RandomnessContract::new(9, 0).rng(Purpose::Resample);
        let v: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let est = bootstrap_mean(&v, RandomnessContract::new(1, 0), 0);
        let se = std_dev(&v) / 20.0;
        assert!((est.se / se - 1.0).abs() < 0.15, "{} vs {se}", est.se);
        assert!(est.contains(est.value));
        assert_eq!(est, bootstrap_mean(&v, RandomnessContract::new(1, 0), 0));
    }

    #[test]
    fn quantiles() {
        let s = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.0);
        assert_eq!(quantile_sorted(&s, 0.125), 0.5);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
    }
}
