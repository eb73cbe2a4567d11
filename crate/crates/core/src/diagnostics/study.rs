use alloc::vec::Vec;

use crate::activation::Activation;
use crate::data::{sample_init_measure, DataModel, DataStream, InitLaw};
use crate::error::{config, Result};
use crate::measure::EmpiricalMeasure;
use crate::rng::RandomnessContract;
use crate::sgd::{train, Ensemble, TrainSchedule, Trajectory};

/// Runs independent jobs `0..n` and returns their results in index order.
/// Implementations may run jobs concurrently; results must not depend on
/// scheduling.
pub trait Executor {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T>;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T> {
        (0..n).map(job).collect()
    }
}

/// R independent SGD runs for each N in a grid. Replica `r` uses stream `r`
/// of `seed` for both initialization and data, at every N.
#[derive(Debug, Clone)]
pub struct ReplicaStudy {
    pub model: DataModel,
    pub init: InitLaw,
    pub activation: Activation,
    pub alpha: f64,
    pub schedule: TrainSchedule,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
}

impl ReplicaStudy {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.init.validate()?;
        self.schedule.validate()?;
        if self.model.dim != self.init.dim {
            return Err(config("data and initialization dimensions differ"));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(config("N grid must be non-empty and positive"));
        }
        if self.replicas == 0 {
            return Err(config("need at least one replica"));
        }
        Ok(())
    }

    pub fn contract(&self, replica: usize) -> RandomnessContract {
        RandomnessContract::new(self.seed, replica as u64)
    }

    pub fn horizon(&self) -> f64 {
        self.schedule.horizon
    }

    /// One replica at one N.
    pub fn run_one(&self, n: usize, replica: usize) -> Result<Trajectory> {
        let contract = self.contract(replica);
        let cloud = sample_init_measure(&self.init, contract, n)?;
        let mut ens = Ensemble::new(cloud, self.alpha, self.activation)?;
        let mut stream = DataStream::new(&self.model, contract);
        train(&mut ens, &mut stream, &self.schedule)
    }

    pub fn run<E: Executor>(&self, exec: &E) -> Result<StudyRuns> {
        self.validate()?;
        let r = self.replicas;
        let jobs = self.n_grid.len() * r;
        let out = exec.map(jobs, |j| self.run_one(self.n_grid[j / r], j % r));
        let mut runs: Vec<Vec<Trajectory>> = Vec::with_capacity(self.n_grid.len());
        let mut it = out.into_iter();
        for _ in &self.n_grid {
            runs.push(it.by_ref().take(r).collect::<Result<Vec<_>>>()?);
        }
        Ok(StudyRuns { study: self.clone(), runs })
    }
}

/// Trajectories of a [`ReplicaStudy`], indexed `[grid position][replica]`.
#[derive(Debug, Clone)]
pub struct StudyRuns {
    pub study: ReplicaStudy,
    pub runs: Vec<Vec<Trajectory>>,
}

impl StudyRuns {
    pub fn n_grid(&self) -> &[usize] {
        &self.study.n_grid
    }

    /// Final measures `mu^N_T` of every replica at grid position `g`.
    pub fn finals(&self, g: usize) -> Vec<&EmpiricalMeasure> {
        self.runs[g].iter().map(|t| &t.last().measure).collect()
    }

    /// Measures at snapshot time `time` for grid position `g`.
    pub fn at(&self, g: usize, time: f64) -> Option<Vec<&EmpiricalMeasure>> {
        self.runs[g].iter().map(|t| t.at(time).map(|s| &s.measure)).collect()
    }
}
