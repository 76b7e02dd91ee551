//! Bayesian variable selection for high-dimensional mediation analysis.
//!
//! Mediators follow a multivariate regression on the exposure with a
//! factor-analytic error covariance; the outcome is regressed on exposure and
//! mediators. Spike-and-slab priors with a Markov random field on the
//! exposure→mediator indicators and a sequential subsetting Bernoulli prior on
//! the mediator→outcome indicators select the active pathways.

pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod tuning;

pub use data::MediationDataset;
pub use error::{Error, Result};
pub use inference::{EffectContrast, SelectionSummary};
pub use model::{FactorCovariance, Hyperparameters, ModelVariant, ParameterState};
pub use sampler::{run_chain, run_chains, ChainConfig, ChainDraws};
pub use scalar::Real;
pub use tuning::{bayesian_fdr_threshold, phase_transition_scan, PhaseScanConfig, PhaseScanResult};

pub type Dataset = MediationDataset<f64>;
pub type State = ParameterState<f64>;
pub type Hyper = Hyperparameters<f64>;
pub type Covariance = FactorCovariance<f64>;
pub type Draws = ChainDraws<f64>;
