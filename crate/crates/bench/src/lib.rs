//! Benchmark harness for graph outlier detectors.
//!
//! A [`GridSpace`] is sampled into per-trial hyperparameters, each trial is
//! run with its own derived seed while runtime and peak heap are recorded,
//! and trials are aggregated into `mean±std (max)` summaries. The crate also
//! runs scalability sweeps and epoch-budget studies.
//!
//! Linking this crate installs [`memory::TrackingAllocator`] as the global
//! allocator so memory figures are available in every binary that uses it.

pub mod aggregate;
pub mod error;
pub mod grid;
pub mod memory;
pub mod report;
pub mod scale;
pub mod trial;

pub use aggregate::{aggregate, AggregateRow, Stat};
pub use error::{Error, Result};
pub use grid::{Axis, GridSpace, Scope};
pub use scale::{scalability_sweep, ScaleRow};
pub use trial::{
    epoch_study, run_benchmark, run_trial, trial_seed, Dataset, EpochStudy, TrialResult,
    TrialStatus,
};

#[global_allocator]
static ALLOCATOR: memory::TrackingAllocator = memory::TrackingAllocator;
