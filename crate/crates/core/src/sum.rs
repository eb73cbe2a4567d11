//! Pairwise (cascade) summation.
//!
//! Reductions over particles go through these helpers so a result depends
//! only on the particle count and order, never on how work was scheduled.

const LEAF: usize = 32;

/// Pairwise sum of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Pairwise sum of `term(i)` for `i in 0..len`, without materialising the terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    sum_range(0, len, &term)
}

fn sum_range<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
    if hi - lo <= LEAF {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += term(i);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        sum_range(lo, mid, term) + sum_range(mid, hi, term)
    }
}

/// Pairwise mean; `0.0` for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_exact_integer_sums() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum_by(1000, |i| (i + 1) as f64), 500_500.0);
    }

    #[test]
    fn by_index_agrees_with_slice() {
        let v: Vec<f64> = (0..777).map(|i| ((i * 37) % 101) as f64 * 0.013 - 0.4).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum_by(v.len(), |i| v[i]).to_bits());
    }

    #[test]
    fn beats_naive_accumulation_on_small_terms() {
        let v: Vec<f64> = (0..1_000_000).map(|_| 0.1).collect();
        let naive: f64 = v.iter().fold(0.0, |a, b| a + b);
        let exact = 100_000.0;
        assert!((pairwise_sum(&v) - exact).abs() < (naive - exact).abs());
    }
}
