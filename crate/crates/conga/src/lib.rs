//! Pairwise Markov random field for multivariate counts with bounded
//! arctan interaction potentials, fitted by pseudo-likelihood MCMC with
//! Dirichlet-process random effects.
//!
//! The crate covers the full workflow: transform selection, sampling,
//! posterior graph recovery, synthetic data generation with known truth,
//! and small exact-enumeration oracles used by the test suite.

pub mod cli;
pub mod data;
pub mod datagen;
pub mod edges;
pub mod error;
pub mod math;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod sampler;
pub mod theta;

pub use data::CountMatrix;
pub use edges::EdgeWeights;
pub use error::{CongaError, Result};
pub use model::ModelParams;
pub use posterior::{GraphComparison, GraphEstimate};
pub use sampler::{PosteriorSamples, PriorConfig, SamplerConfig, SamplerState};
pub use theta::{select_theta, ThetaEstimate, ThetaSearchConfig};
