//! Interval-partition evolutions with Poisson–Dirichlet stationary laws.
//!
//! The crate provides exact transition kernels of the self-similar
//! evolution, its de-Poissonized unit-mass version, the path-level
//! scaffolding-and-spindles construction, the moment polynomials and
//! generators, the distortion metrics, up-down chains on compositions and
//! the statistical harnesses used to cross-check them.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod depoisson;
pub mod dist;
pub mod experiments;
pub mod kernel;
pub mod metrics;
pub mod moments;
pub mod partition;
pub mod pdip;
pub mod scaffold;
pub mod stats;
pub mod updown;

pub use dist::{DistError, RngStream};
pub use kernel::{KernelConfig, KernelParams};
pub use moments::Composition;
pub use partition::{AnnotatedPartition, IntervalPartition, PartitionError};
pub use pdip::Truncation;
pub use scaffold::ScaffoldConfig;
