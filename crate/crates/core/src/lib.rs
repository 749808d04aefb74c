//! Chord-based storage with fixed successor replication (DHash) and dynamic
//! replication, plus the reliability analysis and a discrete-event simulator
//! used to compare them.

pub mod alloc;
pub mod analysis;
pub mod bloom;
pub mod dhash;
pub mod dynamic;
pub mod error;
pub mod fetch;
pub mod id;
pub mod metrics;
pub mod ring;
pub mod scalar;
pub mod sim;
pub mod store;
pub mod sync;

pub use error::{Error, Result};
pub use id::{Id, IdSpace};

/// Run-problem parameters in double precision.
pub type RunParams = analysis::run::RunProblemParams<f64>;
/// Run-problem parameters in single precision.
pub type RunParams32 = analysis::run::RunProblemParams<f32>;
/// Exact rational used by the reference run-problem oracles.
pub type Exact = num_rational::Ratio<num_bigint::BigInt>;
