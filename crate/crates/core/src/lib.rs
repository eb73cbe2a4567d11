//! Mean-field analysis toolkit for one-hidden-layer networks trained by
//! 1/N-scaled online SGD.
//!
//! The crate covers three layers:
//!
//! - the finite-N particle system: [`sgd::Ensemble`] holds N hidden units
//!   `(c^i, w^i)` and advances them one sample at a time with step size
//!   `alpha / N`;
//! - the limiting McKean-Vlasov dynamics: [`meanfield`] evolves an
//!   M-particle representation of the limit law, either self-consistently
//!   or by Picard iteration of the decoupled flow;
//! - statistical diagnostics ([`diagnostics`]) that measure variance decay,
//!   martingale decay, distance to the limit and pairwise decorrelation.
//!
//! Everything here is pure computation and builds without `std`
//! (`default-features = false`); file formats and the command-line runner
//! live in the companion `mflimit` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod activation;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod meanfield;
pub mod measure;
pub mod network;
pub mod particle;
pub mod rng;
pub mod sgd;
pub mod sum;
pub mod test_function;
pub mod transport;

mod math;

pub use activation::Activation;
pub use data::{DataModel, InitLaw, Sample};
pub use error::{Error, Result};
pub use measure::EmpiricalMeasure;
pub use network::{eval_network, loss};
pub use particle::ParticleState;
pub use rng::{Purpose, RandomnessContract};
pub use sgd::{Ensemble, TrainSchedule};
pub use test_function::TestFunction;
