//! Drift/martingale split of `<f, nu^N_k>` along an SGD run.
//!
//! The conditional expectation over `pi` is only computable exactly when
//! `pi` is finitely supported, so [`martingale_decay`] first draws a fixed
//! node set from the data model and then trains on uniform draws from it.
//! The same nodes carry the expectation, which makes `M` an exact
//! martingale for the law actually sampled.

use alloc::vec;
use alloc::vec::Vec;

use super::stats::{bootstrap_mean, Estimate};
use super::study::Executor;
use crate::activation::Activation;
use crate::data::{sample_data, sample_init_measure, DataModel, DataStream, Dataset, InitLaw, SampleSource};
use crate::error::{config, Result};
use crate::meanfield::kernel::{split_generator_on_nodes, Workspace};
use crate::meanfield::Nodes;
use crate::rng::RandomnessContract;
use crate::sgd::Ensemble;
use crate::sum::{pairwise_mean, pairwise_sum_by};
use crate::test_function::TestFunction;

/// Stream id reserved for drawing the node set.
const NODE_STREAM: u64 = u64::MAX;

/// Running sums of the decomposition over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrace {
    pub n: usize,
    pub steps: u64,
    pub m1: f64,
    pub m2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Sum over steps of the conditional variance of `M^1_k` (its
    /// compensator); `E[m1^2]` equals `E[qv1]`.
    pub qv1: f64,
    pub qv2: f64,
    /// `max_k |<f, nu_{k+1}> - <f, nu_k> - (D^1_k + D^2_k + M^1_k + M^2_k)|`.
    pub max_remainder: f64,
    /// `max_k` of the gap between that remainder and the per-particle
    /// second-order Taylor remainder `(1/N) sum_i [f(z_i') - f(z_i) - grad f(z_i) . dz_i]`.
    pub max_identity_error: f64,
    /// Cumulative `(M^1, M^2, D^1, D^2)` after each step.
    pub path: Vec<[f64; 4]>,
}

/// Trains `ens` for `steps` steps on `source`, whose law must be the uniform
/// law on `nodes`, accumulating the decomposition for `f`.
pub fn trace_run<S: SampleSource + ?Sized>(ens: &mut Ensemble, source: &mut S, nodes: &Nodes, f: &TestFunction, steps: u64) -> Result<MartingaleTrace> {
    let n = ens.len();
    let d = ens.dim();
    f.check_arity(d)?;
    if nodes.dim() != d || source.dim() != d {
        return Err(config("node set, data and ensemble dimensions differ"));
    }
    let alpha = ens.alpha();
    let act = ens.activation();
    let inv_n = 1.0 / n as f64;
    let mut ws = Workspace::default();
    let mut x = vec![0.0; d];
    let mut gc = vec![0.0; n];
    let mut gw = vec![0.0; n * d];
    let mut fv = vec![0.0; n];
    let mut tr = MartingaleTrace {
        n,
        steps,
        m1: 0.0,
        m2: 0.0,
        d1: 0.0,
        d2: 0.0,
        qv1: 0.0,
        qv2: 0.0,
        max_remainder: 0.0,
        max_identity_error: 0.0,
        path: Vec::with_capacity(steps as usize),
    };
    for _ in 0..steps {
        let pre = ens.measure().clone();
        for i in 0..n {
            fv[i] = f.value(pre.c()[i], pre.w_of(i));
            gc[i] = f.gradient_into(pre.c()[i], pre.w_of(i), &mut gw[i * d..(i + 1) * d]);
        }
        let (d1, d2, v1, v2) = if alpha == 0.0 {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let (q, a1, a2) = split_generator_on_nodes(&pre, act, nodes, f, &mut ws);
            let k = nodes.len();
            let y = nodes.y();
            let t1: Vec<f64> = (0..k).map(|j| alpha * inv_n * (y[j] - q[j]) * a1[j]).collect();
            let t2: Vec<f64> = (0..k).map(|j| alpha * inv_n * (y[j] - q[j]) * a2[j]).collect();
            let (d1, d2) = (pairwise_mean(&t1), pairwise_mean(&t2));
            let v1 = pairwise_sum_by(k, |j| (t1[j] - d1) * (t1[j] - d1)) / k as f64;
            let v2 = pairwise_sum_by(k, |j| (t2[j] - d2) * (t2[j] - d2)) / k as f64;
            (d1, d2, v1, v2)
        };

        let yk = source.next_into(&mut x);
        let report = ens.sgd_step(&x, yk)?;
        let (s, ds) = ens.last_activations();
        let scale = alpha * inv_n * report.residual;
        let r1 = scale * pairwise_sum_by(n, |i| s[i] * gc[i]) * inv_n;
        let r2 = scale
            * pairwise_sum_by(n, |i| {
                let g = &gw[i * d..(i + 1) * d];
                pre.c()[i] * ds[i] * crate::math::dot(&x, g)
            })
            * inv_n;

        let post = ens.measure();
        let mut taylor = vec![0.0; n];
        let mut delta = vec![0.0; n];
        for i in 0..n {
            let df = f.value(post.c()[i], post.w_of(i)) - fv[i];
            let (w0, w1) = (pre.w_of(i), post.w_of(i));
            let mut lin = gc[i] * (post.c()[i] - pre.c()[i]);
            for j in 0..d {
                lin += gw[i * d + j] * (w1[j] - w0[j]);
            }
            delta[i] = df;
            taylor[i] = df - lin;
        }
        let change = pairwise_mean(&delta);
        let remainder = change - (r1 + r2);
        let identity = remainder - pairwise_mean(&taylor);

        tr.m1 += r1 - d1;
        tr.m2 += r2 - d2;
        tr.d1 += d1;
        tr.d2 += d2;
        tr.qv1 += v1;
        tr.qv2 += v2;
        tr.max_remainder = tr.max_remainder.max(crate::math::abs(remainder));
        tr.max_identity_error = tr.max_identity_error.max(crate::math::abs(identity));
        tr.path.push([tr.m1, tr.m2, tr.d1, tr.d2]);
    }
    Ok(tr)
}

/// Model, initialization and horizon shared by every run of a martingale study.
#[derive(Debug, Clone)]
pub struct MartingaleSetup {
    pub model: DataModel,
    pub init: InitLaw,
    pub activation: Activation,
    pub alpha: f64,
    pub horizon: f64,
    /// Size of the finitely supported data law.
    pub nodes: usize,
    pub seed: u64,
}

impl MartingaleSetup {
    /// The finitely supported law trained on, and its nodes.
    pub fn node_law(&self) -> Result<(DataModel, Nodes)> {
        let samples = sample_data(&self.model, RandomnessContract::new(self.seed, NODE_STREAM), self.nodes)?;
        let ds = Dataset::from_samples(&samples)?;
        let x: Vec<f64> = samples.iter().flat_map(|s| s.x.iter().copied()).collect();
        let nodes = Nodes::from_rows(ds.dim(), &x, ds.labels().to_vec())?;
        Ok((DataModel::from_dataset(ds), nodes))
    }

    pub fn run_one(&self, law: &DataModel, nodes: &Nodes, f: &TestFunction, n: usize, replica: usize) -> Result<MartingaleTrace> {
        let contract = RandomnessContract::new(self.seed, replica as u64);
        let cloud = sample_init_measure(&self.init, contract, n)?;
        let mut ens = Ensemble::new(cloud, self.alpha, self.activation)?;
        let mut stream = DataStream::new(law, contract);
        let steps = crate::math::scaled_floor(n, self.horizon);
        trace_run(&mut ens, &mut stream, nodes, f, steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub n: usize,
    /// Across-replica mean of `M^1(T)^2`.
    pub m1_sq: Estimate,
    pub m2_sq: Estimate,
    /// Across-replica mean of the compensators at `T`.
    pub qv1: Estimate,
    pub qv2: Estimate,
    pub max_remainder: f64,
    pub max_identity_error: f64,
}

/// Second moments of `M^1(T)` and `M^2(T)` across replicas for every N.
pub fn martingale_decay<E: Executor>(
    setup: &MartingaleSetup,
    f: &TestFunction,
    n_grid: &[usize],
    replicas: usize,
    exec: &E,
) -> Result<Vec<MartingaleRow>> {
    if replicas == 0 || n_grid.is_empty() || !(setup.horizon > 0.0) {
        return Err(config("martingale study needs replicas, an N grid and T > 0"));
    }
    let (law, nodes) = setup.node_law()?;
    let jobs = n_grid.len() * replicas;
    let traces = exec.map(jobs, |j| setup.run_one(&law, &nodes, f, n_grid[j / replicas], j % replicas));
    let traces: Vec<MartingaleTrace> = traces.into_iter().collect::<Result<_>>()?;
    let boot = RandomnessContract::new(setup.seed, 0);
    let mut rows = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let cell = &traces[g * replicas..(g + 1) * replicas];
        let col = |get: fn(&MartingaleTrace) -> f64| cell.iter().map(get).collect::<Vec<f64>>();
        let tag = 4 * g as u64;
        rows.push(MartingaleRow {
            n,
            m1_sq: bootstrap_mean(&col(|t| t.m1 * t.m1), boot, tag),
            m2_sq: bootstrap_mean(&col(|t| t.m2 * t.m2), boot, tag + 1),
            qv1: bootstrap_mean(&col(|t| t.qv1), boot, tag + 2),
            qv2: bootstrap_mean(&col(|t| t.qv2), boot, tag + 3),
            max_remainder: cell.iter().map(|t| t.max_remainder).fold(0.0, f64::max),
            max_identity_error: cell.iter().map(|t| t.max_identity_error).fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FixedSamples, Sample};
    use crate::diagnostics::Serial;

    fn setup(alpha: f64) -> MartingaleSetup {
        MartingaleSetup {
            model: DataModel::default_teacher(),
            init: InitLaw::default_for(2),
            activation: Activation::Tanh,
            alpha,
            horizon: 0.5,
            nodes: 64,
            seed: 11,
        }
    }

    #[test]
    fn zero_rate_has_no_martingale() {
        let s = setup(0.0);
        let (law, nodes) = s.node_law().unwrap();
        let tr = s.run_one(&law, &nodes, &TestFunction::clamped_c(1), 40, 0).unwrap();
        assert_eq!((tr.m1, tr.m2, tr.d1, tr.d2), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(tr.steps, 20);
    }

    #[test]
    fn point_mass_data_has_no_martingale() {
        let sample = Sample { x: vec![0.3, -0.7], y: 0.4 };
        let nodes = Nodes::from_rows(2, &sample.x, vec![sample.y]).unwrap();
        let cloud = sample_init_measure(&InitLaw::default_for(2), RandomnessContract::new(1, 0), 50).unwrap();
        let mut ens = Ensemble::new(cloud, 1.0, Activation::Tanh).unwrap();
        let mut src = FixedSamples::new(vec![sample]).unwrap();
        let tr = trace_run(&mut ens, &mut src, &nodes, &TestFunction::clamped_w_norm2(2), 25).unwrap();
        assert!(tr.m1.abs() < 1e-15 && tr.m2.abs() < 1e-15, "{} {}", tr.m1, tr.m2);
        assert_eq!(tr.d1, 0.0);
        assert!(tr.d2 != 0.0);
        assert_eq!(tr.qv1, 0.0);
    }

    #[test]
    fn decomposition_reconciles() {
        let s = setup(1.0);
        let (law, nodes) = s.node_law().unwrap();
        for f in TestFunction::standard_set(2) {
            let tr = s.run_one(&law, &nodes, &f.1, 100, 3).unwrap();
            assert!(tr.max_identity_error < 1e-13, "{}: {}", f.0, tr.max_identity_error);
            assert!(tr.max_remainder > 0.0 && tr.max_remainder < 1e-3);
            let last = tr.path.last().unwrap();
            assert_eq!(*last, [tr.m1, tr.m2, tr.d1, tr.d2]);
        }
    }

    #[test]
    fn remainder_is_second_order() {
        let s = setup(1.0);
        let (law, nodes) = s.node_law().unwrap();
        let f = TestFunction::clamped_c(2);
        let small = s.run_one(&law, &nodes, &f, 50, 0).unwrap();
        let large = s.run_one(&law, &nodes, &f, 500, 0).unwrap();
        let ratio = small.max_remainder / large.max_remainder;
        assert!((100.0 / 3.0..300.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn study_rows_and_compensator() {
        let s = setup(1.0);
        let rows = martingale_decay(&s, &TestFunction::clamped_c(1), &[20, 80], 8, &Serial).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.qv1.value > 0.0 && r.m1_sq.value > 0.0);
        }
        assert!(rows[0].qv1.value > rows[1].qv1.value);
    }
}
