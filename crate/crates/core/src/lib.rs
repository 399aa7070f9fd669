//! Bayesian variable selection for nonlinear regression with nearest-neighbor
//! Gaussian processes.
//!
//! The model is `y = x_Aᵀβ_A + z`, where `z` is a zero-mean NNGP whose parent
//! covariance is `σ²[(1-γ)δ + γ·Matérn52(d_A, ρ)]` and `d_A` only looks at the
//! predictors in the random active set `A`. Inference runs a three-step
//! Metropolis-within-Gibbs sampler:
//!
//! 1. a joint MH move on `(A, β)` with single-index toggles for `A` and the
//!    conditional GLS posterior as the proposal for `β`,
//! 2. a conjugate inverse-gamma draw for `σ²`,
//! 3. an HMC update of `(γ, ρ)` under a reference prior.
//!
//! Module map:
//!
//! - [`covariance`]: active-set distance, Matérn-5/2, nugget-mixed correlation.
//! - [`neighbors`]: Vecchia neighbor sets under `d_A`.
//! - [`nngp`]: sparse `B`/`F` factors of the correlation matrix and their derivatives.
//! - [`refprior`]: reference prior over `(σ², γ, ρ)` and the integrated likelihood.
//! - [`selection`]: prior on `A` and the toggle proposal.
//! - [`mcmc`]: the sampler and chain export.
//! - [`predict`]: posterior-predictive means and inclusion probabilities.
//! - [`bench`]: datasets, designs, test functions and the experiment pipelines.
//!
//! Predictor indices are zero-based throughout the library. Files written by
//! [`mcmc::write_chain_csv`] and the CLI use one-based indices so that column
//! `k` of a chain file refers to predictor `x_k`.

pub mod bench;
pub mod covariance;
pub mod error;
pub mod linalg;
pub mod mcmc;
pub mod neighbors;
pub mod nngp;
pub mod predict;
pub mod refprior;
pub mod selection;

pub use covariance::{ActiveSet, CovarianceParams};
pub use error::{Error, Result};
pub use neighbors::NeighborGraph;
pub use nngp::NngpFactors;
