//! Statistical checks of the finite-N system against its limit: spread
//! decay, the martingale part of the increments, distance to the
//! mean-field solution and two-particle covariance.

pub mod chaos;
pub mod criteria;
pub mod limit;
pub mod lln;
pub mod martingale;
pub mod stats;
pub mod study;

pub use chaos::{chaos_test, ChaosRow};
pub use limit::{limit_distance, LimitRow};
pub use lln::{lln_decay, LlnRow, LlnTable};
pub use martingale::{martingale_decay, trace_run, MartingaleRow, MartingaleSetup, MartingaleTrace};
pub use stats::Estimate;
pub use study::{Executor, ReplicaStudy, Serial, StudyRuns};
