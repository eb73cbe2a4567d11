//! Data laws `pi(dx, dy)` and initial parameter laws.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::Activation;
use crate::error::{config, Error, Result};
use crate::math;
use crate::measure::EmpiricalMeasure;
use crate::particle::ParticleState;
use crate::rng::{Purpose, RandomnessContract, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Fixed network `y = sum_k a_k act(v_k . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherNetwork {
    pub activation: Activation,
    pub a: Vec<f64>,
    /// Row-major `units x d`.
    pub v: Vec<f64>,
}

impl TeacherNetwork {
    /// Three tanh units on `R^2`.
    pub fn default_teacher() -> Self {
        Self {
            activation: Activation::Tanh,
            a: alloc::vec![1.2, -0.9, 0.7],
            v: alloc::vec![1.5, -0.8, -0.6, 1.4, 1.1, 1.0],
        }
    }

    pub fn units(&self) -> usize {
        self.a.len()
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        let d = x.len();
        self.a
            .iter()
            .enumerate()
            .map(|(k, a)| a * self.activation.value(math::dot(&self.v[k * d..(k + 1) * d], x)))
            .sum()
    }
}

/// A finite set of labelled points, sampled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(config("dataset dimension must be at least 1"));
        }
        if y.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if x.len() != y.len() * dim {
            return Err(Error::DimensionMismatch { expected: y.len() * dim, found: x.len() });
        }
        if !x.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(config("dataset has a non-finite entry"));
        }
        Ok(Self { dim, x, y })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let dim = samples.first().ok_or(Error::Empty("dataset"))?.x.len();
        let mut x = Vec::with_capacity(samples.len() * dim);
        let mut y = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.x.len() });
            }
            x.extend_from_slice(&s.x);
            y.push(s.y);
        }
        Self::new(dim, x, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_of(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y_of(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataKind {
    Teacher(TeacherNetwork),
    /// `y = intercept + linear . x + quadratic |x|^2`.
    NoisyPolynomial { intercept: f64, linear: Vec<f64>, quadratic: f64 },
    /// Uniform over stored points; `x_law` is ignored.
    Dataset(Arc<Dataset>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XLaw {
    UniformCube { half_width: f64 },
    /// Independent `N(0, scale^2)` coordinates conditioned on `|x_j| <= cutoff * scale`.
    TruncatedGaussian { scale: f64, cutoff: f64 },
}

impl XLaw {
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        match *self {
            XLaw::UniformCube { half_width } => {
                for v in x.iter_mut() {
                    *v = half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            XLaw::TruncatedGaussian { scale, cutoff } => {
                for v in x.iter_mut() {
                    *v = loop {
                        let z: f64 = StandardNormal.sample(rng);
                        if math::abs(z) <= cutoff {
                            break scale * z;
                        }
                    };
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            XLaw::UniformCube { half_width } if half_width > 0.0 && half_width.is_finite() => Ok(()),
            XLaw::TruncatedGaussian { scale, cutoff } if scale > 0.0 && scale.is_finite() && cutoff > 0.1 && cutoff.is_finite() => Ok(()),
            _ => Err(config("x-law parameters must be positive and finite (truncation cutoff > 0.1)")),
        }
    }
}

/// Law of `(x, y)`: `y` is a deterministic target of `x` plus independent
/// uniform noise on `[-noise_scale, noise_scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataModel {
    pub kind: DataKind,
    pub x_law: XLaw,
    pub noise_scale: f64,
    pub dim: usize,
}

impl DataModel {
    /// Three-unit tanh teacher on `[-1, 1]^2` with noise 0.1.
    pub fn default_teacher() -> Self {
        Self {
            kind: DataKind::Teacher(TeacherNetwork::default_teacher()),
            x_law: XLaw::UniformCube { half_width: 1.0 },
            noise_scale: 0.1,
            dim: 2,
        }
    }

    pub fn from_dataset(dataset: Dataset) -> Self {
        let dim = dataset.dim();
        Self {
            kind: DataKind::Dataset(Arc::new(dataset)),
            x_law: XLaw::UniformCube { half_width: 1.0 },
            noise_scale: 0.0,
            dim,
        }
    }

    pub fn with_noise(mut self, noise_scale: f64) -> Self {
        self.noise_scale = noise_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config("input dimension must be at least 1"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(config("noise scale must be finite and >= 0"));
        }
        match &self.kind {
            DataKind::Teacher(t) => {
                if t.a.is_empty() || t.v.len() != t.a.len() * self.dim {
                    return Err(config("teacher weights do not match the input dimension"));
                }
            }
            DataKind::NoisyPolynomial { linear, .. } => {
                if linear.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: linear.len() });
                }
            }
            DataKind::Dataset(ds) => {
                if ds.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: ds.dim() });
                }
                return Ok(());
            }
        }
        self.x_law.validate()
    }

    /// `E[y | x]` for the synthetic kinds; NaN for a dataset.
    pub fn conditional_mean(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DataKind::Teacher(t) => t.output(x),
            DataKind::NoisyPolynomial { intercept, linear, quadratic } => {
                intercept + math::dot(linear, x) + quadratic * math::dot(x, x)
            }
            DataKind::Dataset(_) => f64::NAN,
        }
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.kind {
            DataKind::Dataset(ds) => Some(ds),
            _ => None,
        }
    }

    /// Draws one sample into `x` and returns its label.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) -> f64 {
        let y = match &self.kind {
            DataKind::Dataset(ds) => {
                let i = rng.random_range(0..ds.len());
                x.copy_from_slice(ds.x_of(i));
                ds.y_of(i)
            }
            _ => {
                self.x_law.sample_into(rng, x);
                self.conditional_mean(x)
            }
        };
        if self.noise_scale > 0.0 {
            y + self.noise_scale * (2.0 * rng.random::<f64>() - 1.0)
        } else {
            y
        }
    }

    /// Empirical `(E|x|^4, E|y|^4)` over `n` draws.
    pub fn fourth_moments(&self, contract: RandomnessContract, n: usize) -> Result<(f64, f64)> {
        let samples = sample_data(self, contract, n)?;
        let x4 = crate::sum::pairwise_sum_by(n, |i| {
            let r2 = math::dot(&samples[i].x, &samples[i].x);
            r2 * r2
        }) / n as f64;
        let y4 = crate::sum::pairwise_sum_by(n, |i| math::powi(samples[i].y, 4)) / n as f64;
        Ok((x4, y4))
    }
}

/// `n` i.i.d. draws from `pi`, from the contract's data stream.
pub fn sample_data(model: &DataModel, contract: RandomnessContract, n: usize) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::Empty("sample count"));
    }
    model.validate()?;
    let mut stream = DataStream::new(model, contract);
    Ok((0..n).map(|_| stream.next_sample()).collect())
}

/// Source of training samples for SGD.
pub trait SampleSource {
    fn dim(&self) -> usize;
    /// Writes the next input into `x` and returns its label.
    fn next_into(&mut self, x: &mut [f64]) -> f64;

    fn next_sample(&mut self) -> Sample {
        let mut x = alloc::vec![0.0; self.dim()];
        let y = self.next_into(&mut x);
        Sample { x, y }
    }
}

/// Endless i.i.d. stream from a [`DataModel`].
#[derive(Debug, Clone)]
pub struct DataStream<'a> {
    model: &'a DataModel,
    rng: StreamRng,
}

impl<'a> DataStream<'a> {
    pub fn new(model: &'a DataModel, contract: RandomnessContract) -> Self {
        Self { model, rng: contract.rng(Purpose::Data) }
    }
}

impl SampleSource for DataStream<'_> {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn next_into(&mut self, x: &mut [f64]) -> f64 {
        self.model.sample_into(&mut self.rng, x)
    }
}

/// Replays a fixed list of samples, cycling when exhausted.
#[derive(Debug, Clone)]
pub struct FixedSamples {
    samples: Vec<Sample>,
    next: usize,
}

impl FixedSamples {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().ok_or(Error::Empty("sample list"))?.x.len();
        if samples.iter().any(|s| s.x.len() != dim) {
            return Err(config("samples have differing input dimensions"));
        }
        Ok(Self { samples, next: 0 })
    }
}

impl SampleSource for FixedSamples {
    fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    fn next_into(&mut self, x: &mut [f64]) -> f64 {
        let s = &self.samples[self.next];
        self.next = (self.next + 1) % self.samples.len();
        x.copy_from_slice(&s.x);
        s.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CLaw {
    UniformInterval { lo: f64, hi: f64 },
    /// Laplace law with the given scale, truncated to `|c| <= cutoff`.
    TruncatedExponentialTail { scale: f64, cutoff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WLaw {
    /// `N(0, scale^2 I)`.
    StandardGaussian { scale: f64 },
    UniformCube { half_width: f64 },
}

/// Law of the initial parameters `(c_0, w_0)`, independent coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitLaw {
    pub c_law: CLaw,
    pub w_law: WLaw,
    pub dim: usize,
}

impl InitLaw {
    /// `c ~ U[-1, 1]`, `w ~ N(0, I_dim)`.
    pub fn default_for(dim: usize) -> Self {
        Self { c_law: CLaw::UniformInterval { lo: -1.0, hi: 1.0 }, w_law: WLaw::StandardGaussian { scale: 1.0 }, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config("input dimension must be at least 1"));
        }
        match self.c_law {
            CLaw::UniformInterval { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => {}
            CLaw::TruncatedExponentialTail { scale, cutoff } if scale > 0.0 && cutoff > 0.0 && scale.is_finite() && cutoff.is_finite() => {}
            _ => return Err(config("c-law needs finite lo <= hi, or positive scale and cutoff")),
        }
        match self.w_law {
            WLaw::StandardGaussian { scale } if scale >= 0.0 && scale.is_finite() => Ok(()),
            WLaw::UniformCube { half_width } if half_width >= 0.0 && half_width.is_finite() => Ok(()),
            _ => Err(config("w-law scale must be finite and >= 0")),
        }
    }

    /// Draws `c` then `w`; so a size-n draw is a prefix of a larger one.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, w: &mut [f64]) -> f64 {
        let c = match self.c_law {
            CLaw::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            CLaw::TruncatedExponentialTail { scale, cutoff } => {
                let u: f64 = rng.random();
                let mass = -math::exp_m1(-cutoff / scale);
                let r = -scale * math::ln(1.0 - u * mass);
                if rng.random::<bool>() {
                    r.min(cutoff)
                } else {
                    -r.min(cutoff)
                }
            }
        };
        match self.w_law {
            WLaw::StandardGaussian { scale } => {
                for v in w.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = scale * z;
                }
            }
            WLaw::UniformCube { half_width } => {
                for v in w.iter_mut() {
                    *v = half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
        }
        c
    }
}

/// `n` i.i.d. particles from the initial law.
pub fn sample_init(law: &InitLaw, contract: RandomnessContract, n: usize) -> Result<Vec<ParticleState>> {
    Ok(sample_init_measure(law, contract, n)?.particles())
}

pub fn sample_init_measure(law: &InitLaw, contract: RandomnessContract, n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::Empty("particle count"));
    }
    law.validate()?;
    let mut rng = contract.rng(Purpose::Init);
    let d = law.dim;
    let mut c = Vec::with_capacity(n);
    let mut w = alloc::vec![0.0; n * d];
    for i in 0..n {
        c.push(law.sample_one(&mut rng, &mut w[i * d..(i + 1) * d]));
    }
    EmpiricalMeasure::new(d, c, w)
}
