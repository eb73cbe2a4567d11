//! Pass/fail rules applied to diagnostic tables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::chaos::ChaosRow;
use super::limit::LimitRow;
use super::lln::LlnTable;
use super::martingale::MartingaleRow;
use super::stats::log_log_slope;
use crate::meanfield::WeakResidual;

pub const LLN_SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);
pub const MARTINGALE_RATIO_RANGE: (f64, f64) = (2.5, 6.0);
pub const RESIDUAL_TOLERANCE: f64 = 0.05;
pub const FLOOR_STANDARD_ERRORS: f64 = 3.0;
pub const MOMENT_SPREAD: f64 = 1.5;
/// Largest log-log slope of the moment bound against N still read as "no
/// increasing trend".
pub const MOMENT_TREND: f64 = 0.05;
pub const SOLVER_FLOOR_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!("{} criterion {:>2} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    lo <= v && v <= hi
}

pub fn lln(tables: &[(String, LlnTable)]) -> Verdict {
    let mut pass = !tables.is_empty();
    let mut parts = Vec::new();
    for (name, t) in tables {
        match t.slope {
            Some(s) => {
                pass &= within(s.value, LLN_SLOPE_RANGE);
                parts.push(format!("{name}: slope {:.3} [{:.3}, {:.3}]", s.value, s.lo, s.hi));
            }
            None => {
                pass = false;
                parts.push(format!("{name}: degenerate spread"));
            }
        }
    }
    Verdict { id: 1, name: "LLN variance decay", pass, detail: parts.join("; ") }
}

/// Ratio of `E[M(T)^2]` between the first and last rows, read from the
/// compensator means; the raw squared-martingale ratio is reported alongside.
pub fn martingale(rows: &[MartingaleRow]) -> Verdict {
    let (Some(a), Some(b)) = (rows.first(), rows.last()) else {
        return Verdict { id: 2, name: "martingale decay", pass: false, detail: "no rows".into() };
    };
    let r1 = a.qv1.value / b.qv1.value;
    let r2 = a.qv2.value / b.qv2.value;
    let raw1 = a.m1_sq.value / b.m1_sq.value;
    let raw2 = a.m2_sq.value / b.m2_sq.value;
    let pass = within(r1, MARTINGALE_RATIO_RANGE) && within(r2, MARTINGALE_RATIO_RANGE);
    Verdict {
        id: 2,
        name: "martingale decay",
        pass,
        detail: format!(
            "N={} vs N={}: M1 ratio {r1:.3} (raw {raw1:.3}), M2 ratio {r2:.3} (raw {raw2:.3})",
            a.n, b.n
        ),
    }
}

pub fn residual(results: &[(String, WeakResidual)]) -> Verdict {
    let pass = !results.is_empty() && results.iter().all(|(_, r)| r.relative <= RESIDUAL_TOLERANCE);
    let detail = results.iter().map(|(n, r)| format!("{n}: {:.4}", r.relative)).collect::<Vec<_>>().join("; ");
    Verdict { id: 3, name: "weak residual", pass, detail }
}

/// Final-time gaps per test function must not grow along the N grid, and
/// the last must lie within a few bootstrap standard errors of the
/// sampling floor.
pub fn limit(rows: &[LimitRow], names: &[String], horizon: f64) -> Verdict {
    let last: Vec<&LimitRow> = rows.iter().filter(|r| (r.time - horizon).abs() <= 1e-9 * horizon.max(1.0)).collect();
    let mut pass = last.len() >= 2;
    let mut parts = Vec::new();
    for (fi, name) in names.iter().enumerate() {
        let gaps: Vec<f64> = last.iter().map(|r| r.gaps[fi].value).collect();
        let mono = gaps.windows(2).all(|w| w[1] <= w[0]);
        let Some(end) = last.last() else { break };
        let g = end.gaps[fi];
        let floor = end.floors[fi];
        let near = g.value <= floor + FLOOR_STANDARD_ERRORS * g.se;
        pass &= mono && near;
        let seq = gaps.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" > ");
        parts.push(format!("{name}: {seq}, floor {floor:.4}, se {:.4}", g.se));
    }
    Verdict { id: 4, name: "finite-N to limit", pass, detail: parts.join("; ") }
}

/// `|pooled covariance|` strictly decreasing along the N grid, and the 95%
/// interval of the particle-(1, 2) covariance containing 0 at the largest N.
pub fn chaos(rows: &[ChaosRow]) -> Verdict {
    let mags: Vec<f64> = rows.iter().map(|r| r.pooled.value.abs()).collect();
    let decreasing = rows.len() >= 2 && mags.windows(2).all(|w| w[1] < w[0]);
    let zero = rows.last().is_some_and(|r| r.pair.contains(0.0));
    let seq = mags.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" > ");
    let detail = match rows.last() {
        Some(r) => format!("|pooled cov| {seq}; pair cov at N={} is {:.2e} [{:.2e}, {:.2e}]", r.n, r.pair.value, r.pair.lo, r.pair.hi),
        None => "no rows".into(),
    };
    Verdict { id: 5, name: "propagation of chaos", pass: decreasing && zero, detail }
}

/// `bounds[g]` is the moment bound `max_t (1/N) sum (|c| + |w|)` at `n_grid[g]`.
pub fn moment(n_grid: &[usize], bounds: &[f64]) -> Verdict {
    let hi = bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let trend = log_log_slope(&ns, bounds);
    let pass = bounds.len() >= 2 && hi / lo <= MOMENT_SPREAD && trend.is_some_and(|s| s <= MOMENT_TREND);
    let vals = bounds.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
    Verdict {
        id: 6,
        name: "moment bound",
        pass,
        detail: format!("bounds [{vals}], max/min {:.3}, trend {:.4}", hi / lo, trend.unwrap_or(f64::NAN)),
    }
}

/// Per-slice solver gaps against per-slice noise floors, plus the last
/// three Picard distance ratios.
pub fn solvers(gaps: &[f64], floors: &[f64], distances: &[f64]) -> Verdict {
    let agree = !gaps.is_empty() && gaps.len() == floors.len() && gaps.iter().zip(floors).all(|(g, f)| *g <= SOLVER_FLOOR_FACTOR * f);
    let ratios: Vec<f64> = distances.windows(2).map(|p| p[1] / p[0]).collect();
    let geometric = ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|&r| r < 1.0);
    let worst = gaps.iter().zip(floors).map(|(g, f)| g / f).fold(0.0, f64::max);
    let tail = ratios.iter().rev().take(3).rev().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    Verdict {
        id: 8,
        name: "solver agreement",
        pass: agree && geometric,
        detail: format!("max gap/floor {worst:.3} over {} slices; {} Picard iterations, last ratios [{tail}]", gaps.len(), distances.len()),
    }
}

/// Distances between successive-N histograms must decrease.
pub fn histograms(n_grid: &[usize], distances: &[f64]) -> Verdict {
    let pass = !distances.is_empty() && distances.windows(2).all(|w| w[1] < w[0]);
    let parts = distances
        .iter()
        .enumerate()
        .map(|(i, d)| format!("W1(N={}, N={}) = {d:.4}", n_grid[i], n_grid[i + 1]))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict { id: 9, name: "MNIST histograms", pass, detail: parts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::stats::Estimate;

    #[test]
    fn moment_rule() {
        assert!(moment(&[100, 400, 1600], &[1.2, 1.19, 1.18]).pass);
        assert!(!moment(&[100, 400, 1600], &[1.0, 1.3, 1.6]).pass);
        assert!(!moment(&[100, 400, 1600], &[1.0, 1.05, 1.2]).pass);
    }

    #[test]
    fn chaos_rule() {
        let row = |n, v: f64, lo: f64, hi: f64| ChaosRow { n, pair: Estimate { value: 0.0, se: 0.1, lo, hi }, pooled: Estimate::exact(v) };
        assert!(chaos(&[row(100, 1e-2, -1.0, 1.0), row(400, -3e-3, -1.0, 1.0)]).pass);
        assert!(!chaos(&[row(100, 1e-2, -1.0, 1.0), row(400, 2e-2, -1.0, 1.0)]).pass);
        assert!(!chaos(&[row(100, 1e-2, -1.0, 1.0), row(400, 1e-3, 0.1, 1.0)]).pass);
    }

    #[test]
    fn solver_rule() {
        assert!(solvers(&[0.1, 0.2], &[0.1, 0.1], &[1.0, 0.5, 0.25, 0.1]).pass);
        assert!(!solvers(&[0.1, 0.4], &[0.1, 0.1], &[1.0, 0.5, 0.25, 0.1]).pass);
        assert!(!solvers(&[0.1], &[0.1], &[1.0, 0.5, 0.6, 0.1]).pass);
    }

    #[test]
    fn histogram_rule() {
        assert!(histograms(&[100, 1000, 10000], &[0.3, 0.1]).pass);
        assert!(!histograms(&[100, 1000, 10000], &[0.1, 0.3]).pass);
    }
}
