//! Nonparametric graphon estimation.
//!
//! Networks are sampled from a scaled graphon `p_ij = rho_n f(xi_i, xi_j)`,
//! stochastic blockmodels are fitted by maximum profile likelihood over
//! size-constrained community assignments, and the block averages are read
//! back as a step-function estimate of `f`. The [`risk`] module scores fits
//! by normalized Bernoulli KL risk and aligned mean-squared error, and
//! [`harness`] sweeps all of this over `(n, k, rho_n)` grids with paired
//! seeds to check how the risks decay.
//!
//! The `parallel` feature (on by default) runs restarts, replicates and grid
//! sweeps on rayon; without it every [`Execution`] request runs sequentially.

// NaN must fail range checks, and symmetric matrices are indexed in pairs.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blockmodel;
pub mod error;
pub mod exec;
pub mod graphon;
pub mod harness;
pub mod partition;
pub mod risk;
pub mod rng;
pub mod sampler;
pub mod selftest;
pub mod step;

pub use blockmodel::{
    bernoulli_kl, block_stats, mple_exhaustive, mple_search, oracle_block_means, oracle_mple,
    profile_log_likelihood, BlockStats, CommunityAssignment, Constraints, FitResult, SearchConfig,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graphon::Graphon;
pub use partition::Partition;
pub use risk::{GraphonEstimate, RiskReport};
pub use sampler::{AdjacencyMatrix, EdgeProbabilityMatrix, LatentSample};
pub use step::StepGraphon;
