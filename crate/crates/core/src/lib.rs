//! Overfitting Bayesian mixtures of factor analyzers.
//!
//! The crate clusters correlated, high-dimensional data by fitting a mixture
//! of factor analyzers with deliberately too many components. A sparse
//! Dirichlet prior on the mixing proportions empties the redundant
//! components, so the number of clusters is read off the posterior of the
//! number of *alive* (non-empty) components.
//!
//! The pieces:
//!
//! * [`model`]: data, hyperparameters, chain state and dimension bookkeeping.
//! * [`sampler`]: one partially collapsed Gibbs sweep over a chain.
//! * [`tempering`]: prior parallel tempering over the Dirichlet concentration,
//!   with the two-stage overdispersed initialization.
//! * [`selection`]: alive components, observed log-likelihood, AIC/BIC/DIC.
//! * [`postprocess`]: ECR relabelling, MAP draw, regularized scores and
//!   posterior summaries.
//! * [`diagnostics`]: Gelman-Rubin PSRF and (adjusted) Rand indices.
//! * [`synthgen`]: synthetic benchmark datasets with known ground truth.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod postprocess;
pub mod rng;
pub mod sampler;
pub mod selection;
pub mod synthgen;
pub mod tempering;

pub use error::{Error, Result};
pub use model::{
    ChainState, Dataset, ErrorVariances, HyperParams, LoadingMatrix, McmcTrace, ModelScore,
    SigmaMode,
};
