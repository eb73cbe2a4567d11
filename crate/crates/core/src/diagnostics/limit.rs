use alloc::vec::Vec;

use rand::Rng;

use super::stats::{bootstrap_mean, mean, Estimate, BOOTSTRAP_RESAMPLES};
use super::study::StudyRuns;
use crate::error::{Error, Result};
use crate::math;
use crate::meanfield::MeanFieldSolution;
use crate::measure::{pair, EmpiricalMeasure};
use crate::rng::{Purpose, RandomnessContract};
use crate::test_function::TestFunction;
use crate::transport::{wasserstein, Order};

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub n: usize,
    pub time: f64,
    /// Replica mean of the slice `W_1` between `mu^N_t` and an N-point
    /// resample of the mean-field cloud.
    pub wasserstein: Estimate,
    /// Per test function: replica mean of `|<f, mu^N_t> - <f, mu_bar_t>|`.
    pub gaps: Vec<Estimate>,
    /// Per test function: the same gap for an i.i.d. N-sample of the
    /// mean-field cloud against an independent full-size resample of it,
    /// i.e. what pure sampling noise alone produces.
    pub floors: Vec<f64>,
}

/// Distance from the finite-N runs to the mean-field solution at every
/// snapshot time of the study.
pub fn limit_distance(runs: &StudyRuns, solution: &MeanFieldSolution, fs: &[TestFunction], contract: RandomnessContract) -> Result<Vec<LimitRow>> {
    let times = &runs.study.schedule.snapshot_times;
    let mut rows = Vec::new();
    let mut tag = 0u64;
    for (g, &n) in runs.n_grid().iter().enumerate() {
        for &t in times {
            let limit = solution.slice_at(t).ok_or(Error::MisalignedGrid { time: t })?;
            let finite = runs.at(g, t).ok_or(Error::MisalignedGrid { time: t })?;
            let mut rng = contract.rng_indexed(Purpose::Resample, tag);
            let mut w = Vec::with_capacity(finite.len());
            for mu in &finite {
                let reference = resample(limit, n, &mut rng)?;
                w.push(wasserstein(mu, &reference, Order::One)?.value);
            }
            let wasserstein = bootstrap_mean(&w, contract, tag);
            let mut gaps = Vec::with_capacity(fs.len());
            let mut floors = Vec::with_capacity(fs.len());
            for (fi, f) in fs.iter().enumerate() {
                let target = pair(f, limit)?;
                let g: Vec<f64> = finite.iter().map(|mu| pair(f, mu).map(|v| math::abs(v - target))).collect::<Result<_>>()?;
                gaps.push(bootstrap_mean(&g, contract, tag + 1 + fi as u64));
                floors.push(sampling_floor(limit, f, n, contract, tag + 1 + fi as u64)?);
            }
            rows.push(LimitRow { n, time: t, wasserstein, gaps, floors });
            tag += 1 + fs.len() as u64;
        }
    }
    Ok(rows)
}

/// Mean of `|<f, S_n> - <f, S_M>|` over independent with-replacement
/// resamples `S_n`, `S_M` of `cloud` (M its size).
pub fn sampling_floor(cloud: &EmpiricalMeasure, f: &TestFunction, n: usize, contract: RandomnessContract, index: u64) -> Result<f64> {
    f.check_arity(cloud.dim())?;
    let values: Vec<f64> = (0..cloud.len()).map(|i| f.value(cloud.c()[i], cloud.w_of(i))).collect();
    let m = values.len();
    let mut rng = contract.rng_indexed(Purpose::Resample, (1 << 40) + index);
    let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let a: f64 = (0..n).map(|_| values[rng.random_range(0..m)]).sum::<f64>() / n as f64;
        let b: f64 = (0..m).map(|_| values[rng.random_range(0..m)]).sum::<f64>() / m as f64;
        draws.push(math::abs(a - b));
    }
    Ok(mean(&draws))
}

fn resample<R: Rng + ?Sized>(cloud: &EmpiricalMeasure, n: usize, rng: &mut R) -> Result<EmpiricalMeasure> {
    if cloud.len() == n {
        Ok(cloud.clone())
    } else {
        cloud.resample(n, rng)
    }
}
