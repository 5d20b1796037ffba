//! Non-deep detectors.

pub mod iforest;
pub mod lof;
pub mod residual;
pub mod scan;

pub use iforest::{iforest_fit, IForestParams};
pub use lof::{lof_fit, LofParams};
pub use residual::{
    anomalous_fit, radar_fit, radar_fit_dense, residual_fit, Mixing, ResidualFit, ResidualParams,
    ResidualVariant,
};
pub use scan::{scan_fit, ScanParams};
