//! Exact density-matrix simulation of full network nonlocality sharing in the
//! extended bilocal scenario, with max-min angle optimization over the KGT
//! witnesses.

pub mod analysis;
pub mod error;
pub mod kgt;
pub mod linalg;
pub mod optimize;
pub mod scenario;
pub mod states;

pub use error::{Error, Result};
pub use kgt::{kgt_values, ClosedFormCoefficients, Correlators, KgtValues};
pub use scenario::{run_pipeline, JointDistribution, MarginalDistribution, ScenarioConfig, ScenarioEngine, Settings};
