use crate::activation::Activation;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::math;
use crate::measure::EmpiricalMeasure;
use crate::sgd::Ensemble;
use crate::sum::pairwise_sum_by;

/// `g(x) = (1/N) sum_i c^i act(w^i . x)`.
pub fn eval_network(ensemble: &Ensemble, x: &[f64]) -> Result<f64> {
    network_output(ensemble.measure(), ensemble.activation(), x)
}

/// Half mean squared error over `batch`.
pub fn loss(ensemble: &Ensemble, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let mut sq = alloc::vec::Vec::with_capacity(batch.len());
    for s in batch {
        let r = s.y - eval_network(ensemble, &s.x)?;
        sq.push(r * r);
    }
    Ok(0.5 * crate::sum::pairwise_mean(&sq))
}

/// Network output for an arbitrary cloud, the pairing `<c act(w . x), mu>`.
pub fn network_output(mu: &EmpiricalMeasure, activation: Activation, x: &[f64]) -> Result<f64> {
    if x.len() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: x.len() });
    }
    Ok(pairwise_sum_by(mu.len(), |i| mu.c()[i] * activation.value(math::dot(mu.w_of(i), x))) / mu.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ensemble(c: Vec<f64>, w: Vec<f64>, dim: usize) -> Ensemble {
        Ensemble::new(EmpiricalMeasure::new(dim, c, w).unwrap(), 1.0, Activation::Tanh).unwrap()
    }

    #[test]
    fn zero_output_weights_give_zero() {
        let e = ensemble(vec![0.0; 3], vec![0.3, -1.0, 2.0, 0.1, 5.0, -2.0], 2);
        assert_eq!(eval_network(&e, &[0.7, -0.2]).unwrap(), 0.0);
        let e = ensemble(vec![2.0], vec![0.0, 0.0], 2);
        assert_eq!(eval_network(&e, &[4.0, -9.0]).unwrap(), 0.0);
    }

    #[test]
    fn two_unit_scalar_oracle() {
        let e = ensemble(vec![1.0, -1.0], vec![1.0, 2.0], 1);
        let want = (0.5f64.tanh() - 1.0f64.tanh()) / 2.0;
        assert!((eval_network(&e, &[0.5]).unwrap() - want).abs() < 1e-16);
        let l = loss(&e, &[Sample { x: vec![0.5], y: 1.0 }]).unwrap();
        assert!((l - 0.5 * (1.0 - want) * (1.0 - want)).abs() < 1e-16);
    }

    #[test]
    fn loss_examples() {
        let e = ensemble(vec![0.0; 2], vec![1.0, 2.0], 1);
        assert_eq!(loss(&e, &[Sample { x: vec![0.3], y: 3.0 }]).unwrap(), 4.5);
        assert!(matches!(loss(&e, &[]), Err(Error::Empty(_))));
        let e = ensemble(vec![1.5, -0.5], vec![1.0, 2.0], 1);
        let batch: Vec<Sample> = [0.1, -0.4, 0.9]
            .iter()
            .map(|&x| Sample { x: vec![x], y: eval_network(&e, &[x]).unwrap() })
            .collect();
        assert_eq!(loss(&e, &batch).unwrap(), 0.0);
    }

    #[test]
    fn rejects_wrong_input_dimension() {
        let e = ensemble(vec![1.0], vec![1.0, 2.0], 2);
        assert!(matches!(eval_network(&e, &[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn linear_in_each_output_weight() {
        let c = vec![0.4, -1.1, 0.9];
        let w = vec![0.2, -0.7, 1.3, 0.5, -0.1, 0.8];
        let x = [0.6, -0.3];
        let base = eval_network(&ensemble(c.clone(), w.clone(), 2), &x).unwrap();
        let mut c2 = c.clone();
        c2[1] *= 2.0;
        let doubled = eval_network(&ensemble(c2, w.clone(), 2), &x).unwrap();
        let term = c[1] * (w[2] * x[0] + w[3] * x[1]).tanh() / 3.0;
        assert!((doubled - base - term).abs() < 1e-15);
    }
}
