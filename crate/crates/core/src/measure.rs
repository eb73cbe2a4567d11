//! Uniform point-cloud measures on `R^{1+d}`, test-function pairing and
//! histograms.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config, Error, Result};
use crate::particle::ParticleState;
use crate::sum::pairwise_sum_by;
use crate::test_function::TestFunction;

/// Uniformly weighted atoms `(c^i, w^i)`, stored column-wise: `c` holds the
/// output weights and `w` the row-major `N x d` input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    c: Vec<f64>,
    w: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, c: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(config("input dimension must be at least 1"));
        }
        if c.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        if w.len() != c.len() * dim {
            return Err(Error::DimensionMismatch { expected: c.len() * dim, found: w.len() });
        }
        if !c.iter().chain(&w).all(|v| v.is_finite()) {
            return Err(config("empirical measure has a non-finite atom"));
        }
        Ok(Self { dim, c, w })
    }

    pub fn from_particles(particles: &[ParticleState]) -> Result<Self> {
        let first = particles.first().ok_or(Error::Empty("empirical measure"))?;
        let dim = first.dim();
        let mut c = Vec::with_capacity(particles.len());
        let mut w = Vec::with_capacity(particles.len() * dim);
        for p in particles {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
            c.push(p.c);
            w.extend_from_slice(&p.w);
        }
        Self::new(dim, c, w)
    }

    pub(crate) fn from_parts_unchecked(dim: usize, c: Vec<f64>, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), c.len() * dim);
        Self { dim, c, w }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.c, &mut self.w)
    }

    pub fn w_of(&self, i: usize) -> &[f64] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particle(&self, i: usize) -> ParticleState {
        ParticleState { c: self.c[i], w: self.w_of(i).to_vec() }
    }

    pub fn particles(&self) -> Vec<ParticleState> {
        (0..self.len()).map(|i| self.particle(i)).collect()
    }

    /// Atom `i` as a point `(c, w_1, ..., w_d)`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(1 + self.dim);
        z.push(self.c[i]);
        z.extend_from_slice(self.w_of(i));
        z
    }

    /// The measure with atoms reordered so that atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let c = order.iter().map(|&i| self.c[i]).collect();
        let mut w = Vec::with_capacity(self.w.len());
        for &i in order {
            w.extend_from_slice(self.w_of(i));
        }
        Self::from_parts_unchecked(self.dim, c, w)
    }

    /// The first `n` atoms.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(config("prefix length out of range"));
        }
        Ok(Self::from_parts_unchecked(self.dim, self.c[..n].to_vec(), self.w[..n * self.dim].to_vec()))
    }

    /// Bootstrap resample to `n` atoms (with replacement).
    pub fn resample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("resample size"));
        }
        let order: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.len())).collect();
        Ok(self.permuted(&order))
    }

    /// `(1/N) sum_i (|c^i| + |w^i|)`.
    pub fn moment_guard(&self) -> f64 {
        let d = self.dim;
        pairwise_sum_by(self.len(), |i| {
            let w = &self.w[i * d..(i + 1) * d];
            self.c[i].abs() + crate::math::sqrt(crate::math::dot(w, w))
        }) / self.len() as f64
    }

    /// Fourth moments `((1/N) sum c^4, (1/N) sum |w|^4)`.
    pub fn fourth_moments(&self) -> (f64, f64) {
        let d = self.dim;
        let n = self.len() as f64;
        let c4 = pairwise_sum_by(self.len(), |i| crate::math::powi(self.c[i], 4)) / n;
        let w4 = pairwise_sum_by(self.len(), |i| {
            let w = &self.w[i * d..(i + 1) * d];
            let r2 = crate::math::dot(w, w);
            r2 * r2
        }) / n;
        (c4, w4)
    }

    /// Largest absolute parameter component.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().chain(&self.w).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `<f, mu> = (1/N) sum_i f(c^i, w^i)`.
pub fn pair(f: &TestFunction, mu: &EmpiricalMeasure) -> Result<f64> {
    f.check_arity(mu.dim())?;
    Ok(pair_unchecked(f, mu))
}

pub(crate) fn pair_unchecked(f: &TestFunction, mu: &EmpiricalMeasure) -> f64 {
    pairwise_sum_by(mu.len(), |i| f.value(mu.c[i], mu.w_of(i))) / mu.len() as f64
}

/// Which scalar of an atom a histogram bins.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    C,
    /// Input weight `w_j`, zero-based.
    W(usize),
    Functional(TestFunction),
}

impl Selector {
    pub fn values(&self, mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        match self {
            Selector::C => Ok(mu.c.clone()),
            Selector::W(j) => {
                if *j >= mu.dim() {
                    return Err(Error::DimensionMismatch { expected: mu.dim(), found: j + 1 });
                }
                Ok((0..mu.len()).map(|i| mu.w_of(i)[*j]).collect())
            }
            Selector::Functional(f) => {
                f.check_arity(mu.dim())?;
                Ok((0..mu.len()).map(|i| f.value(mu.c[i], mu.w_of(i))).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub selector: Selector,
}

impl Histogram1D {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

/// Equal-width histogram spanning `[min, max]` of the selected scalar; the
/// maximum lands in the last bin. If every value is equal the result is a
/// single bin `[v - 0.5, v + 0.5]`.
pub fn histogram(mu: &EmpiricalMeasure, selector: Selector, bins: usize) -> Result<Histogram1D> {
    if bins < 2 {
        return Err(config("histogram needs at least 2 bins"));
    }
    let values = selector.values(mu)?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        return Ok(Histogram1D { edges: alloc::vec![lo - 0.5, lo + 0.5], counts: alloc::vec![values.len() as u64], selector });
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * width).collect();
    edges.push(hi);
    let mut counts = alloc::vec![0u64; bins];
    for v in values {
        let k = crate::math::floor((v - lo) / width) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    Ok(Histogram1D { edges, counts, selector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RandomnessContract};
    use alloc::vec;

    fn three_atoms() -> EmpiricalMeasure {
        EmpiricalMeasure::new(2, vec![1.0, -0.5, 0.25], vec![0.0, 1.0, 1.5, -1.0, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn rejects_malformed_clouds() {
        assert!(matches!(EmpiricalMeasure::new(1, vec![], vec![]), Err(Error::Empty(_))));
        assert!(matches!(EmpiricalMeasure::new(2, vec![1.0], vec![1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(EmpiricalMeasure::new(1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn pairing_examples() {
        let mu = three_atoms();
        assert_eq!(pair(&TestFunction::Constant(1.0), &mu).unwrap(), 1.0);
        let single = EmpiricalMeasure::new(1, vec![2.0], vec![0.0]).unwrap();
        assert_eq!(pair(&TestFunction::clamped_c(1), &single).unwrap(), 2.0);
        // Hand sum of c^2 (clamp inactive): (1 + 0.25 + 0.0625) / 3.
        let got = pair(&TestFunction::clamped_c(2), &mu).unwrap();
        assert!((got - 1.3125 / 3.0).abs() < 1e-15);
        // |w|^2 per atom: 1, 3.25, 0.5.
        let got = pair(&TestFunction::clamped_w_norm2(2), &mu).unwrap();
        assert!((got - 4.75 / 3.0).abs() < 1e-15);
        assert!(pair(&TestFunction::clamped_w_norm2(3), &mu).is_err());
    }

    #[test]
    fn pairing_is_permutation_invariant_and_linear() {
        let mut rng = RandomnessContract::new(5, 0).rng(Purpose::Init);
        let n = 500;
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mu = EmpiricalMeasure::new(2, c, w).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.swap(3, 400);
        let nu = mu.permuted(&order);
        for f in [TestFunction::clamped_c(2), TestFunction::clamped_w_norm2(2)] {
            let a = pair(&f, &mu).unwrap();
            let b = pair(&f, &nu).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        let f = TestFunction::clamped_c(1);
        let g = TestFunction::clamped_w_norm2(2);
        let combo = 2.0 * pair(&f, &mu).unwrap() - 0.5 * pair(&g, &mu).unwrap();
        let direct = (0..n).map(|i| 2.0 * f.value(mu.c()[i], mu.w_of(i)) - 0.5 * g.value(mu.c()[i], mu.w_of(i))).sum::<f64>() / n as f64;
        assert!((combo - direct).abs() < 1e-12);
    }

    #[test]
    fn histogram_examples() {
        let mu = EmpiricalMeasure::new(1, vec![0.0, 0.4, 0.6, 1.0], vec![0.0; 4]).unwrap();
        let h = histogram(&mu, Selector::C, 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);

        let flat = EmpiricalMeasure::new(1, vec![3.0; 7], vec![1.0; 7]).unwrap();
        let h = histogram(&flat, Selector::C, 5).unwrap();
        assert_eq!(h.counts, vec![7]);
        assert_eq!(h.edges, vec![2.5, 3.5]);
        assert!(histogram(&flat, Selector::C, 1).is_err());
        assert!(histogram(&flat, Selector::W(1), 4).is_err());
    }

    #[test]
    fn histogram_of_uniform_cloud_is_binomial() {
        let mut rng = RandomnessContract::new(21, 0).rng(Purpose::Init);
        let n = 10_000;
        let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Pin the range so the 10 bins have width exactly 0.2.
        c[0] = -1.0;
        c[1] = 1.0;
        let mu = EmpiricalMeasure::new(1, c, vec![0.0; n]).unwrap();
        let h = histogram(&mu, Selector::C, 10).unwrap();
        assert_eq!(h.total(), n as u64);
        let tol = 4.0 * (n as f64 * 0.1 * 0.9).sqrt();
        for &k in &h.counts {
            assert!((k as f64 - 1000.0).abs() <= tol, "count {k}");
        }
        for pair in h.edges.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn moment_guard_formula() {
        let zero = EmpiricalMeasure::new(3, vec![0.0; 4], vec![0.0; 12]).unwrap();
        assert_eq!(zero.moment_guard(), 0.0);
        let one = EmpiricalMeasure::new(3, vec![3.0], vec![4.0, 0.0, 0.0]).unwrap();
        assert_eq!(one.moment_guard(), 7.0);
    }
}
