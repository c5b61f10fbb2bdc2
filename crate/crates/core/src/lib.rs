//! Adaptive blockwise Stein estimation for mildly ill-posed inverse problems
//! in the Gaussian sequence model `y_k = b_k theta_k + epsilon xi_k`.
//!
//! Modules follow the pipeline: [`model`] generates data, [`blocks`] builds
//! the weakly geometric partition, [`penalties`] calibrates per-block
//! penalties, [`stein`] computes the data-driven filter, [`filters`] holds
//! risks and oracles, [`hulls`] checks the risk-hull inequality by
//! simulation, and [`harness`] wires everything to a CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod csvio;
pub mod error;
pub mod filters;
pub mod harness;
pub mod hulls;
pub mod model;
pub mod montecarlo;
pub mod penalties;
pub mod stein;

pub use blocks::{block_stats, weakly_geometric_scheme, BlockScheme, BlockStats};
pub use error::{Error, Result};
pub use filters::{BlockFilter, Filter, MonotoneFilter};
pub use hulls::{HullSpec, HullVariant};
pub use model::{Observation, OperatorSpectrum, SignalCoefficients, SignalKind};
pub use montecarlo::{Execution, McEstimate, MonteCarlo, NoiseStream};
pub use penalties::PenaltyValues;
