//! Unsupervised node outlier detection on static attributed graphs.
//!
//! The crate bundles everything needed to build a labeled benchmark graph and
//! score its nodes:
//!
//! - [`graph`]: immutable CSR graphs with dense node features, ground-truth
//!   outlier labels and score vectors.
//! - [`synth`]: random partition graphs plus structural (clique) and
//!   contextual (attribute swap) outlier injection.
//! - [`tensor`]: a small reverse-mode differentiation engine over dense
//!   matrices with sparse propagation and an Adam optimizer.
//! - [`detectors`]: fourteen detectors, five classic and nine deep.
//! - [`metrics`]: ROC-AUC, average precision and Recall@k.
//! - [`bundle`]: on-disk graph bundles (JSON metadata + CSV payloads).

pub mod bundle;
pub mod detectors;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{AttributedGraph, OutlierKind, OutlierLabels, ScoreVector};
pub use tensor::Matrix;
