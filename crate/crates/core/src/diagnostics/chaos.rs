use alloc::vec::Vec;

use super::lln::pick;
use super::stats::{bootstrap, covariance, mean, Estimate};
use super::study::StudyRuns;
use crate::error::{config, Result};
use crate::measure::EmpiricalMeasure;
use crate::rng::RandomnessContract;
use crate::test_function::TestFunction;

pub const MIN_CHAOS_REPLICAS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosRow {
    pub n: usize,
    /// Across-replica covariance of `f1(z^1_T)` and `f2(z^2_T)`.
    pub pair: Estimate,
    /// The same covariance averaged over every ordered pair `i != j`; equal
    /// in expectation by exchangeability, with far less noise.
    pub pooled: Estimate,
}

/// Two-particle covariance at the final snapshot for every N of the study.
pub fn chaos_test(runs: &StudyRuns, f1: &TestFunction, f2: &TestFunction, contract: RandomnessContract) -> Result<Vec<ChaosRow>> {
    if runs.study.replicas < MIN_CHAOS_REPLICAS {
        return Err(config("the chaos test needs at least 50 replicas"));
    }
    if runs.n_grid().iter().any(|&n| n < 2) {
        return Err(config("the chaos test needs at least two particles"));
    }
    let mut rows = Vec::new();
    for (g, &n) in runs.n_grid().iter().enumerate() {
        let finals = runs.finals(g);
        let pair = pair_covariance(&finals, f1, f2, 0, 1, contract, 2 * g as u64)?;
        let pooled = pooled_covariance(&finals, f1, f2, contract, 2 * g as u64 + 1)?;
        rows.push(ChaosRow { n, pair, pooled });
    }
    Ok(rows)
}

/// Covariance across replicas of `f1` at particle `i` and `f2` at particle `j`.
pub fn pair_covariance(
    finals: &[&EmpiricalMeasure],
    f1: &TestFunction,
    f2: &TestFunction,
    i: usize,
    j: usize,
    contract: RandomnessContract,
    index: u64,
) -> Result<Estimate> {
    let mut a = Vec::with_capacity(finals.len());
    let mut b = Vec::with_capacity(finals.len());
    for mu in finals {
        f1.check_arity(mu.dim())?;
        if i.max(j) >= mu.len() || i == j {
            return Err(config("particle pair out of range"));
        }
        a.push(f1.value(mu.c()[i], mu.w_of(i)));
        b.push(f2.value(mu.c()[j], mu.w_of(j)));
    }
    Ok(bootstrap(a.len(), contract, index, |idx| covariance(&pick(&a, idx), &pick(&b, idx))))
}

/// `E[f1(z^i) f2(z^j)] - E[f1(z^1)] E[f2(z^1)]` estimated over all ordered
/// pairs `i != j` of every replica.
pub fn pooled_covariance(finals: &[&EmpiricalMeasure], f1: &TestFunction, f2: &TestFunction, contract: RandomnessContract, index: u64) -> Result<Estimate> {
    let mut a = Vec::with_capacity(finals.len());
    let mut b = Vec::with_capacity(finals.len());
    let mut cross = Vec::with_capacity(finals.len());
    for mu in finals {
        f1.check_arity(mu.dim())?;
        f2.check_arity(mu.dim())?;
        let n = mu.len() as f64;
        let v1: Vec<f64> = (0..mu.len()).map(|i| f1.value(mu.c()[i], mu.w_of(i))).collect();
        let v2: Vec<f64> = (0..mu.len()).map(|i| f2.value(mu.c()[i], mu.w_of(i))).collect();
        let (m1, m2) = (mean(&v1), mean(&v2));
        let diag = mean(&v1.iter().zip(&v2).map(|(x, y)| x * y).collect::<Vec<f64>>());
        a.push(m1);
        b.push(m2);
        cross.push((n * m1 * m2 - diag) / (n - 1.0));
    }
    Ok(bootstrap(a.len(), contract, index, |idx| mean(&pick(&cross, idx)) - mean(&pick(&a, idx)) * mean(&pick(&b, idx))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::data::{DataModel, InitLaw};
    use crate::diagnostics::{ReplicaStudy, Serial};
    use crate::sgd::TrainSchedule;

    fn study(alpha: f64, n_grid: Vec<usize>, replicas: usize) -> ReplicaStudy {
        ReplicaStudy {
            model: DataModel::default_teacher(),
            init: InitLaw::default_for(2),
            activation: Activation::Tanh,
            alpha,
            schedule: TrainSchedule::uniform(0.5, 1),
            n_grid,
            replicas,
            seed: 31,
        }
    }

    #[test]
    fn pooled_matches_brute_force_pairs() {
        let runs = study(1.0, vec![5], 50).run(&Serial).unwrap();
        let finals = runs.finals(0);
        let f = TestFunction::clamped_c(1);
        let g = TestFunction::clamped_w_norm2(2);
        let pooled = pooled_covariance(&finals, &f, &g, RandomnessContract::new(1, 0), 0).unwrap().value;
        let mut cross = 0.0;
        let (mut ma, mut mb) = (0.0, 0.0);
        for mu in &finals {
            let mut s = 0.0;
            for i in 0..5 {
                ma += f.value(mu.c()[i], mu.w_of(i)) / 250.0;
                mb += g.value(mu.c()[i], mu.w_of(i)) / 250.0;
                for j in 0..5 {
                    if i != j {
                        s += f.value(mu.c()[i], mu.w_of(i)) * g.value(mu.c()[j], mu.w_of(j));
                    }
                }
            }
            cross += s / 20.0 / 50.0;
        }
        assert!((pooled - (cross - ma * mb)).abs() < 1e-12);
    }

    #[test]
    fn untrained_particles_are_uncorrelated() {
        let runs = study(0.0, vec![10], 60).run(&Serial).unwrap();
        let f = TestFunction::clamped_c(1);
        let rows = chaos_test(&runs, &f, &f, RandomnessContract::new(2, 0)).unwrap();
        assert!(rows[0].pair.contains(0.0), "{:?}", rows[0].pair);
        assert!(rows[0].pooled.contains(0.0), "{:?}", rows[0].pooled);
    }

    #[test]
    fn pair_choice_does_not_matter() {
        let runs = study(1.0, vec![8], 200).run(&Serial).unwrap();
        let finals = runs.finals(0);
        let f = TestFunction::clamped_c(1);
        let a = pair_covariance(&finals, &f, &f, 0, 1, RandomnessContract::new(3, 0), 0).unwrap();
        let b = pair_covariance(&finals, &f, &f, 5, 2, RandomnessContract::new(3, 0), 1).unwrap();
        let z = (a.value - b.value).abs() / (a.se * a.se + b.se * b.se).sqrt();
        assert!(z < 3.0, "z = {z}");
    }

    #[test]
    fn preconditions() {
        let f = TestFunction::clamped_c(1);
        let few = study(1.0, vec![4], 10).run(&Serial).unwrap();
        assert!(chaos_test(&few, &f, &f, RandomnessContract::new(1, 0)).is_err());
        let single = study(1.0, vec![1], 50).run(&Serial).unwrap();
        assert!(chaos_test(&single, &f, &f, RandomnessContract::new(1, 0)).is_err());
    }
}
