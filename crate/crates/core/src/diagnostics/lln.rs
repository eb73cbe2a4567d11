use alloc::vec::Vec;

use super::stats::{bootstrap, log_log_slope, mean, std_dev, Estimate};
use super::study::StudyRuns;
use crate::error::{config, Result};
use crate::measure::pair;
use crate::rng::RandomnessContract;
use crate::test_function::TestFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub n: usize,
    /// Across-replica mean of `<f, mu^N_T>`.
    pub mean: Estimate,
    /// Across-replica standard deviation of `<f, mu^N_T>`.
    pub std: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnTable {
    pub rows: Vec<LlnRow>,
    /// Slope of `ln std` against `ln N`; `None` when some std vanishes.
    pub slope: Option<Estimate>,
}

/// Spread of `<f, mu^N_T>` across replicas, and its decay rate in N.
pub fn lln_decay(runs: &StudyRuns, f: &TestFunction, contract: RandomnessContract) -> Result<LlnTable> {
    let grid = runs.n_grid();
    if grid.len() < 2 {
        return Err(config("variance decay needs at least two network sizes"));
    }
    let values: Vec<Vec<f64>> = (0..grid.len())
        .map(|g| runs.finals(g).into_iter().map(|mu| pair(f, mu)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(grid.len());
    for (g, v) in values.iter().enumerate() {
        let m = bootstrap(v.len(), contract, 2 * g as u64, |idx| mean(&pick(v, idx)));
        let s = bootstrap(v.len(), contract, 2 * g as u64 + 1, |idx| std_dev(&pick(v, idx)));
        rows.push(LlnRow { n: grid[g], mean: m, std: s });
    }
    let ns: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let stds: Vec<f64> = rows.iter().map(|r| r.std.value).collect();
    let slope = log_log_slope(&ns, &stds).map(|value| {
        // Replicas are resampled jointly across N: replica r shares its seed
        // at every grid point.
        let r = values[0].len();
        let mut est = bootstrap(r, contract, 1 << 20, |idx| {
            let s: Vec<f64> = values.iter().map(|v| std_dev(&pick(v, idx))).collect();
            log_log_slope(&ns, &s).unwrap_or(f64::NAN)
        });
        est.value = value;
        est
    });
    Ok(LlnTable { rows, slope })
}

pub(crate) fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}
