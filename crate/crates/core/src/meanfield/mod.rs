//! The limiting dynamics. Each particle `Z = (c, w)` follows
//!
//! ```text
//! dc/dt = int alpha (y - Q_t(x)) act(w . x) pi(dx, dy)
//! dw/dt = int alpha (y - Q_t(x)) c act'(w . x) x pi(dx, dy)
//! ```
//!
//! with `Q_t(x) = E[c_t act(w_t . x)]` taken over the law of `Z_t`. The law
//! is represented by M sample paths; `pi` by quadrature [`Nodes`].
//! [`solve_from_cloud`] closes the system with the M-sample mean at every
//! Euler step, [`picard_iterate`] instead freezes `Q` from the previous
//! iterate and re-solves the decoupled flow.

pub(crate) mod kernel;
pub mod quadrature;

use alloc::vec;
use alloc::vec::Vec;

use crate::activation::Activation;
use crate::data::{sample_init_measure, DataModel, InitLaw};
use crate::error::{config, Error, Result};
use crate::math;
use crate::measure::{pair, EmpiricalMeasure};
use crate::particle::ParticleState;
use crate::rng::RandomnessContract;
use crate::sgd::DIVERGENCE_GUARD;
use crate::test_function::TestFunction;
use crate::transport::{wasserstein, Order};

use kernel::{drift_field, fits_cache, generator_on_nodes, network_on_nodes, Workspace};
pub use quadrature::{Nodes, QuadMode, QuadratureSpec, Refresh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldConfig {
    pub activation: Activation,
    pub alpha: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Sample paths M.
    pub particles: usize,
    /// Keep a slice every this many Euler steps (the final step is always kept).
    pub record_every: usize,
    pub quadrature: QuadratureSpec,
}

impl MeanFieldConfig {
    /// `dt = T / 1000`, a slice every 10 steps, 4096 frozen Monte Carlo nodes.
    pub fn new(activation: Activation, alpha: f64, horizon: f64, particles: usize) -> Self {
        Self {
            activation,
            alpha,
            horizon,
            dt: horizon * 1e-3,
            particles,
            record_every: 10,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn steps(&self) -> usize {
        math::round(self.horizon / self.dt) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(config("learning rate must be finite and >= 0"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite() && self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(config("need 0 < dt <= T"));
        }
        let steps = self.steps() as f64;
        if math::abs(steps * self.dt - self.horizon) > 1e-9 * self.horizon {
            return Err(config("T must be an integer multiple of dt"));
        }
        if self.particles == 0 {
            return Err(config("need at least one sample path"));
        }
        if self.record_every == 0 {
            return Err(config("record_every must be at least 1"));
        }
        if self.quadrature.nodes == 0 {
            return Err(config("quadrature needs at least one node"));
        }
        Ok(())
    }

    fn slice_steps(&self) -> Vec<usize> {
        let n = self.steps();
        let mut s: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if *s.last().unwrap() != n {
            s.push(n);
        }
        s
    }
}

/// Particle representation of the limit law on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSolution {
    pub times: Vec<f64>,
    pub slices: Vec<EmpiricalMeasure>,
    pub slice_steps: Vec<usize>,
    pub config: MeanFieldConfig,
    /// Source of the quadrature nodes.
    pub contract: RandomnessContract,
}

impl MeanFieldSolution {
    /// A "solution" that never moves from `cloud`; the usual Picard start.
    pub fn frozen(cloud: EmpiricalMeasure, config: MeanFieldConfig, contract: RandomnessContract) -> Result<Self> {
        config.validate()?;
        let slice_steps = config.slice_steps();
        let times = slice_steps.iter().map(|&s| time_of(&config, s)).collect();
        let slices = vec![cloud; slice_steps.len()];
        Ok(Self { times, slices, slice_steps, config, contract })
    }

    pub fn initial(&self) -> &EmpiricalMeasure {
        &self.slices[0]
    }

    pub fn last(&self) -> &EmpiricalMeasure {
        self.slices.last().expect("solution has slices")
    }

    pub fn slice_at(&self, time: f64) -> Option<&EmpiricalMeasure> {
        self.times.iter().position(|t| math::abs(t - time) <= 1e-9 * time.max(1.0)).map(|i| &self.slices[i])
    }

    /// `max |c(t_{s+1}) - c(t_s)| / (t_{s+1} - t_s)` over paths and slices.
    pub fn regularity_constant(&self) -> f64 {
        let mut worst = 0.0f64;
        for s in 1..self.slices.len() {
            let h = self.times[s] - self.times[s - 1];
            let (a, b) = (self.slices[s - 1].c(), self.slices[s].c());
            for (x, y) in a.iter().zip(b) {
                worst = worst.max(math::abs(y - x) / h);
            }
        }
        worst
    }

    /// `(E c^4, E |w|^4)` for each slice.
    pub fn fourth_moments(&self) -> Vec<(f64, f64)> {
        self.slices.iter().map(|s| s.fourth_moments()).collect()
    }
}

fn time_of(config: &MeanFieldConfig, step: usize) -> f64 {
    if step == config.steps() {
        config.horizon
    } else {
        step as f64 * config.dt
    }
}

/// `(G_1, G_2)` at one particle for a given output function `q`:
/// `G_1 = (1/K) sum_k alpha (y_k - q(x_k)) act(w . x_k)`,
/// `G_2 = (1/K) sum_k alpha (y_k - q(x_k)) c act'(w . x_k) x_k`.
pub fn drift<Q: Fn(&[f64]) -> f64>(z: &ParticleState, q: Q, nodes: &Nodes, alpha: f64, activation: Activation) -> Result<(f64, Vec<f64>)> {
    if z.dim() != nodes.dim() {
        return Err(Error::DimensionMismatch { expected: nodes.dim(), found: z.dim() });
    }
    let cloud = EmpiricalMeasure::from_particles(core::slice::from_ref(z))?;
    let r: Vec<f64> = (0..nodes.len()).map(|k| alpha * (nodes.y()[k] - q(&nodes.x_of(k)))).collect();
    let mut dc = [0.0];
    let mut dw = vec![0.0; z.dim()];
    drift_field(&cloud, activation, nodes, &r, &mut Workspace::default(), false, &mut dc, &mut dw);
    Ok((dc[0], dw))
}

/// Draws the M initial paths from `init` and solves self-consistently.
pub fn solve_selfconsistent(init: &InitLaw, model: &DataModel, config: &MeanFieldConfig, contract: RandomnessContract) -> Result<MeanFieldSolution> {
    config.validate()?;
    let cloud = sample_init_measure(init, contract, config.particles)?;
    solve_from_cloud(cloud, model, config, contract)
}

/// Explicit Euler for the closed system, `Q` recomputed from the current
/// cloud at every step.
pub fn solve_from_cloud(cloud: EmpiricalMeasure, model: &DataModel, config: &MeanFieldConfig, contract: RandomnessContract) -> Result<MeanFieldSolution> {
    let config = MeanFieldConfig { particles: cloud.len(), ..*config };
    evolve(cloud, model, &config, contract, Driver::SelfConsistent)
}

enum Driver<'a> {
    SelfConsistent,
    Previous(&'a MeanFieldSolution),
}

fn evolve(cloud: EmpiricalMeasure, model: &DataModel, config: &MeanFieldConfig, contract: RandomnessContract, driver: Driver<'_>) -> Result<MeanFieldSolution> {
    config.validate()?;
    model.validate()?;
    config.quadrature.validate(model)?;
    if cloud.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: cloud.dim() });
    }
    let steps = config.steps();
    let slice_steps = config.slice_steps();
    let m = cloud.len();
    let d = cloud.dim();
    let act = config.activation;
    let frozen_nodes = match config.quadrature.refresh {
        Refresh::Frozen => Some(config.quadrature.nodes_for(model, contract, 0)?),
        Refresh::PerStep => None,
    };
    let mut ws = Workspace::default();
    let mut state = cloud;
    let mut slices = Vec::with_capacity(slice_steps.len());
    slices.push(state.clone());
    let mut next_slice = 1;
    let mut dc = vec![0.0; m];
    let mut dw = vec![0.0; m * d];
    let mut prev_q: Option<(usize, Vec<f64>)> = None;
    for n in 0..steps {
        if config.alpha != 0.0 {
            let owned;
            let nodes = match &frozen_nodes {
                Some(nodes) => nodes,
                None => {
                    owned = config.quadrature.nodes_for(model, contract, n as u64)?;
                    &owned
                }
            };
            let (q, cached) = match &driver {
                Driver::SelfConsistent => {
                    let store = fits_cache(m, nodes.len());
                    (network_on_nodes(&state, act, nodes, &mut ws, store), store)
                }
                Driver::Previous(prev) => {
                    let idx = prev.slice_steps.partition_point(|&s| s <= n) - 1;
                    let reuse = frozen_nodes.is_some() && prev_q.as_ref().is_some_and(|(i, _)| *i == idx);
                    if !reuse {
                        let q = network_on_nodes(&prev.slices[idx], act, nodes, &mut ws, false);
                        prev_q = Some((idx, q));
                    }
                    (prev_q.as_ref().unwrap().1.clone(), false)
                }
            };
            let r: Vec<f64> = nodes.y().iter().zip(&q).map(|(y, qk)| config.alpha * (y - qk)).collect();
            drift_field(&state, act, nodes, &r, &mut ws, cached, &mut dc, &mut dw);
            let (c, w) = state.parts_mut();
            let mut worst: Option<f64> = None;
            for i in 0..m {
                c[i] += config.dt * dc[i];
                let row = &mut w[i * d..(i + 1) * d];
                for j in 0..d {
                    row[j] += config.dt * dw[i * d + j];
                }
                let mag = math::abs(c[i]).max(math::sqrt(math::dot(row, row)));
                if !(mag <= DIVERGENCE_GUARD) {
                    worst = Some(if mag.is_nan() { f64::INFINITY } else { mag });
                }
            }
            if let Some(magnitude) = worst {
                return Err(Error::Diverged { step: n as u64, magnitude });
            }
        }
        if next_slice < slice_steps.len() && slice_steps[next_slice] == n + 1 {
            slices.push(state.clone());
            next_slice += 1;
        }
    }
    let times = slice_steps.iter().map(|&s| time_of(config, s)).collect();
    Ok(MeanFieldSolution { times, slices, slice_steps, config: *config, contract })
}

/// Outcome of a converged Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub solution: MeanFieldSolution,
    /// `max_s W_4(m_{k+1}(s), m_k(s))` for each iteration.
    pub distances: Vec<f64>,
}

impl PicardReport {
    /// Ratios of successive distances.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|p| p[1] / p[0]).collect()
    }
}

/// Iterates `m -> H(m)`: every iterate re-solves the paths from `m0`'s
/// initial cloud with `Q` read (piecewise constant in time) from the
/// previous iterate's slices, and stops once the largest slice-wise
/// truncated `W_4` between iterates falls below `tol`.
pub fn picard_iterate(m0: &MeanFieldSolution, model: &DataModel, tol: f64, max_iters: usize) -> Result<PicardReport> {
    if !(tol > 0.0) || max_iters == 0 {
        return Err(config("Picard needs tol > 0 and at least one iteration"));
    }
    let mut prev = m0.clone();
    let mut distances = Vec::new();
    for _ in 0..max_iters {
        let next = evolve(m0.initial().clone(), model, &m0.config, m0.contract, Driver::Previous(&prev))?;
        let dist = max_slice_distance(&next, &prev, Order::Four)?;
        distances.push(dist);
        prev = next;
        if dist < tol {
            return Ok(PicardReport { solution: prev, distances });
        }
    }
    Err(Error::NonConvergence { tol, distances })
}

/// `max_s W_p(a(s), b(s))` over the common time grid.
pub fn max_slice_distance(a: &MeanFieldSolution, b: &MeanFieldSolution, order: Order) -> Result<f64> {
    Ok(slice_distances(a, b, order)?.into_iter().fold(0.0, f64::max))
}

/// `W_p(a(s), b(s))` at every slice; the grids must coincide.
pub fn slice_distances(a: &MeanFieldSolution, b: &MeanFieldSolution, order: Order) -> Result<Vec<f64>> {
    if a.times.len() != b.times.len() {
        return Err(Error::MisalignedGrid { time: a.times.last().copied().unwrap_or(0.0) });
    }
    let mut out = Vec::with_capacity(a.times.len());
    for (s, (&ta, &tb)) in a.times.iter().zip(&b.times).enumerate() {
        if math::abs(ta - tb) > 1e-9 * ta.max(1.0) {
            return Err(Error::MisalignedGrid { time: ta });
        }
        out.push(wasserstein(&a.slices[s], &b.slices[s], order)?.value);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    /// `|<f, mu_T> - <f, mu_0> - int_0^T I(s) ds|`.
    pub residual: f64,
    /// `|int_0^T I(s) ds|`.
    pub magnitude: f64,
    /// `residual / magnitude` (0 when both vanish).
    pub relative: f64,
    /// `<f, mu_T> - <f, mu_0>`.
    pub increment: f64,
}

/// Residual of the weak-form evolution equation for `f`, with the `pi`
/// integral taken by `quad` (nodes from `contract`) and the time integral by
/// the trapezoid rule over `time_nodes` slices spread evenly over the grid.
pub fn weak_residual(
    sol: &MeanFieldSolution,
    f: &TestFunction,
    model: &DataModel,
    quad: &QuadratureSpec,
    contract: RandomnessContract,
    time_nodes: usize,
) -> Result<WeakResidual> {
    let s = sol.slices.len();
    if s < 2 || time_nodes < 2 {
        return Err(config("weak residual needs at least two time slices"));
    }
    f.check_arity(sol.initial().dim())?;
    quad.validate(model)?;
    let picks: Vec<usize> = if time_nodes >= s {
        (0..s).collect()
    } else {
        let mut p: Vec<usize> = (0..time_nodes).map(|i| math::round(i as f64 * (s - 1) as f64 / (time_nodes - 1) as f64) as usize).collect();
        p.dedup();
        p
    };
    let act = sol.config.activation;
    let alpha = sol.config.alpha;
    let mut ws = Workspace::default();
    let mut integrand = Vec::with_capacity(picks.len());
    for &i in &picks {
        let cloud = &sol.slices[i];
        let value = if alpha == 0.0 || f.is_constant() {
            0.0
        } else {
            let nodes = quad.nodes_for(model, contract, sol.slice_steps[i] as u64)?;
            let q = network_on_nodes(cloud, act, &nodes, &mut ws, false);
            let a = generator_on_nodes(cloud, act, &nodes, f, &mut ws);
            let terms: Vec<f64> = (0..nodes.len()).map(|k| alpha * (nodes.y()[k] - q[k]) * a[k]).collect();
            crate::sum::pairwise_mean(&terms)
        };
        integrand.push(value);
    }
    let mut integral = 0.0;
    for w in 1..picks.len() {
        let h = sol.times[picks[w]] - sol.times[picks[w - 1]];
        integral += 0.5 * h * (integrand[w] + integrand[w - 1]);
    }
    let increment = pair(f, sol.last())? - pair(f, sol.initial())?;
    let residual = math::abs(increment - integral);
    let magnitude = math::abs(integral);
    let relative = if magnitude > 0.0 {
        residual / magnitude
    } else if residual == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(WeakResidual { residual, magnitude, relative, increment })
}
