//! The finite-N particle system: online SGD with step `alpha / N`.

use alloc::vec;
use alloc::vec::Vec;

use crate::activation::Activation;
use crate::data::SampleSource;
use crate::error::{config, Error, Result};
use crate::math;
use crate::measure::EmpiricalMeasure;
use crate::sum::pairwise_sum_by;

/// Parameter magnitude beyond which a run is declared diverged.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// N hidden units trained one sample at a time.
#[derive(Debug, Clone)]
pub struct Ensemble {
    particles: EmpiricalMeasure,
    step: u64,
    alpha: f64,
    activation: Activation,
    w_norm2: Vec<f64>,
    act: Vec<f64>,
    act_deriv: Vec<f64>,
    support: Vec<usize>,
}

/// What one update saw: the network output and residual before the update
/// and the moment guard after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub output: f64,
    pub residual: f64,
    pub moment_guard: f64,
}

impl Ensemble {
    pub fn new(particles: EmpiricalMeasure, alpha: f64, activation: Activation) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(config("learning rate must be finite and >= 0"));
        }
        let n = particles.len();
        let w_norm2 = (0..n).map(|i| math::dot(particles.w_of(i), particles.w_of(i))).collect();
        Ok(Self {
            particles,
            step: 0,
            alpha,
            activation,
            w_norm2,
            act: vec![0.0; n],
            act_deriv: vec![0.0; n],
            support: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.dim()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn measure(&self) -> &EmpiricalMeasure {
        &self.particles
    }

    pub fn into_measure(self) -> EmpiricalMeasure {
        self.particles
    }

    /// `act(w^i . x)` and `act'(w^i . x)` from the most recent step, evaluated
    /// at the pre-update parameters.
    pub fn last_activations(&self) -> (&[f64], &[f64]) {
        (&self.act, &self.act_deriv)
    }

    /// `(1/N) sum_i (|c^i| + |w^i|)`.
    pub fn moment_guard(&self) -> f64 {
        let c = self.particles.c();
        pairwise_sum_by(self.len(), |i| math::abs(c[i]) + math::sqrt(self.w_norm2[i])) / self.len() as f64
    }

    /// One SGD update on `(x, y)`. All particles move simultaneously using
    /// the output computed from the pre-update parameters.
    pub fn sgd_step(&mut self, x: &[f64], y: f64) -> Result<StepReport> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        let n = self.len();
        self.support.clear();
        self.support.extend((0..d).filter(|&j| x[j] != 0.0));
        let act = self.activation;
        {
            let w = self.particles.w();
            for i in 0..n {
                let row = &w[i * d..(i + 1) * d];
                let mut u = 0.0;
                for &j in &self.support {
                    u += row[j] * x[j];
                }
                let s = act.value(u);
                self.act[i] = s;
                self.act_deriv[i] = act.derivative_from_value(u, s);
            }
        }
        let c = self.particles.c();
        let output = pairwise_sum_by(n, |i| c[i] * self.act[i]) / n as f64;
        let residual = y - output;
        let r = self.alpha * residual / n as f64;
        let limit2 = DIVERGENCE_GUARD * DIVERGENCE_GUARD;
        let mut worst: Option<f64> = None;
        if r != 0.0 {
            let (c, w) = self.particles.parts_mut();
            for i in 0..n {
                let c_old = c[i];
                c[i] = c_old + r * self.act[i];
                let gain = r * c_old * self.act_deriv[i];
                let row = &mut w[i * d..(i + 1) * d];
                let mut n2 = self.w_norm2[i];
                for &j in &self.support {
                    let old = row[j];
                    let new = old + gain * x[j];
                    row[j] = new;
                    n2 += new * new - old * old;
                }
                self.w_norm2[i] = n2;
                if !(math::abs(c[i]) <= DIVERGENCE_GUARD) || !(n2 <= limit2) {
                    let exact = math::sqrt(math::dot(&row[..], &row[..]));
                    let m = math::abs(c[i]).max(exact);
                    if !(m <= DIVERGENCE_GUARD) {
                        worst = Some(if m.is_nan() { f64::INFINITY } else { worst.unwrap_or(0.0).max(m) });
                    } else {
                        self.w_norm2[i] = exact * exact;
                    }
                }
            }
        }
        let step = self.step;
        self.step += 1;
        if let Some(magnitude) = worst {
            return Err(Error::Diverged { step, magnitude });
        }
        Ok(StepReport { output, residual, moment_guard: self.moment_guard() })
    }

    /// Recomputes the cached `|w^i|^2` from the parameters.
    pub fn refresh_norms(&mut self) {
        for i in 0..self.len() {
            let w = self.particles.w_of(i);
            self.w_norm2[i] = math::dot(w, w);
        }
    }
}

/// Scaled-time horizon and snapshot times; time `t` is step `floor(N t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
}

impl TrainSchedule {
    /// Snapshots at `0, T/k, ..., T`.
    pub fn uniform(horizon: f64, intervals: usize) -> Self {
        let k = intervals.max(1);
        let snapshot_times = (0..=k).map(|i| horizon * i as f64 / k as f64).collect();
        Self { horizon, snapshot_times }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config("horizon T must be positive and finite"));
        }
        if self.snapshot_times.is_empty() {
            return Err(config("at least one snapshot time is required"));
        }
        for t in &self.snapshot_times {
            if !(*t >= 0.0 && *t <= self.horizon) {
                return Err(config(alloc::format!("snapshot time {t} outside [0, T]")));
            }
        }
        if self.snapshot_times.windows(2).any(|p| p[1] < p[0]) {
            return Err(config("snapshot times must be sorted"));
        }
        Ok(())
    }

    pub fn total_steps(&self, n: usize) -> u64 {
        math::scaled_floor(n, self.horizon)
    }

    pub fn step_at(&self, n: usize, t: f64) -> u64 {
        math::scaled_floor(n, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: u64,
    pub measure: EmpiricalMeasure,
    pub moment_guard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Largest moment guard over every step `k <= floor(N T)`.
    pub max_moment_guard: f64,
    pub steps: u64,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| math::abs(s.time - time) <= 1e-9 * time.max(1.0))
    }
}

/// Runs `floor(N T)` steps on `source`, recording snapshots. On divergence
/// the error carries the failing step; use [`train_partial`] to keep the
/// snapshots taken before it.
pub fn train<S: SampleSource + ?Sized>(ensemble: &mut Ensemble, source: &mut S, schedule: &TrainSchedule) -> Result<Trajectory> {
    let (traj, err) = train_partial(ensemble, source, schedule)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`train`], but a divergence returns the snapshots collected so far
/// alongside the error.
pub fn train_partial<S: SampleSource + ?Sized>(
    ensemble: &mut Ensemble,
    source: &mut S,
    schedule: &TrainSchedule,
) -> Result<(Trajectory, Option<Error>)> {
    schedule.validate()?;
    if source.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch { expected: ensemble.dim(), found: source.dim() });
    }
    let n = ensemble.len();
    let total = schedule.total_steps(n);
    let marks: Vec<u64> = schedule.snapshot_times.iter().map(|&t| schedule.step_at(n, t)).collect();
    let mut snapshots = Vec::with_capacity(marks.len());
    let mut next = 0;
    let mut max_guard = ensemble.moment_guard();
    let mut x = vec![0.0; ensemble.dim()];
    let start = ensemble.step();
    let take = |ens: &Ensemble, snaps: &mut Vec<Snapshot>, next: &mut usize| {
        while *next < marks.len() && marks[*next] == ens.step() - start {
            snaps.push(Snapshot {
                time: schedule.snapshot_times[*next],
                step: marks[*next],
                measure: ens.measure().clone(),
                moment_guard: ens.moment_guard(),
            });
            *next += 1;
        }
    };
    take(ensemble, &mut snapshots, &mut next);
    for _ in 0..total {
        let y = source.next_into(&mut x);
        match ensemble.sgd_step(&x, y) {
            Ok(report) => max_guard = max_guard.max(report.moment_guard),
            Err(e) => {
                let steps = ensemble.step() - start;
                return Ok((Trajectory { snapshots, max_moment_guard: max_guard, steps }, Some(e)));
            }
        }
        take(ensemble, &mut snapshots, &mut next);
    }
    Ok((Trajectory { snapshots, max_moment_guard: max_guard, steps: total }, None))
}
