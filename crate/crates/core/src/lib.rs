//! Pattern-hierarchy classifier.
//!
//! Rows are first self-organised into base clusters and sub-clusters using
//! closest-link grouping, frequency-grid hubs and a centroid merge test. A
//! simulated teaching phase then asks an oracle for a small number of true
//! labels and spreads them through the cluster structure.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod linkage;
pub mod metric;
pub mod self_organiser;
pub mod synthetic;
pub mod teaching;

pub use error::{Error, Result};
