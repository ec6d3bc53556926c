//! Blockmodel likelihood algebra and maximum profile likelihood fitting.
//!
//! Labels are 0-based in the API. Saturated blocks (average 0 or 1) add
//! nothing to the likelihood and are masked out of divergence sums.

mod assignment;
mod exhaustive;
mod oracle;
pub(crate) mod search;
mod stats;

use serde::{Deserialize, Serialize};

pub use assignment::{CommunityAssignment, Constraints};
pub use exhaustive::{count_admissible, EXHAUSTIVE_BUDGET};
pub use oracle::{oracle_block_means, oracle_divergence, oracle_exhaustive, oracle_mple, OracleFit};
pub use stats::{
    bernoulli_kl, block_stats, divergence_objective, log_likelihood_at, pairwise_log_likelihood,
    profile_log_likelihood, BlockStats,
};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::stream;
use crate::sampler::AdjacencyMatrix;
use search::{multi_restart, AdjacencyWeights, RestartPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Total restarts, including warm starts and the degree-sorted start.
    pub restarts: usize,
    pub seed: u64,
    /// Use degree-sorted contiguous groups as one of the restarts.
    pub degree_init: bool,
    pub max_sweeps: u64,
    pub exec: Execution,
    #[serde(skip)]
    pub warm_starts: Vec<CommunityAssignment>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { restarts: 5, seed: 0, degree_init: true, max_sweeps: 200, exec: Execution::default(), warm_starts: Vec::new() }
    }
}

impl SearchConfig {
    /// `restarts` random admissible starts and nothing else.
    pub fn new(restarts: usize, seed: u64) -> Self {
        SearchConfig { restarts, seed, degree_init: false, ..Default::default() }
    }

    pub fn with_degree_init(mut self, on: bool) -> Self {
        self.degree_init = on;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_warm_starts(mut self, starts: Vec<CommunityAssignment>) -> Self {
        self.warm_starts = starts;
        self
    }

    fn plan_inputs(&self, n: usize, k: usize, constraints: &Constraints) -> Result<Vec<Vec<usize>>> {
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        constraints.check_feasible(n, k)?;
        self.warm_starts
            .iter()
            .map(|z| {
                if z.n() != n || z.k() != k {
                    return Err(Error::config("warm start has the wrong n or k"));
                }
                z.check(constraints)?;
                Ok(z.labels().to_vec())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchInfo {
    /// `"local"` or `"exhaustive"`.
    pub method: String,
    pub seed: u64,
    pub relabel_count: u64,
    pub sweeps: u64,
    /// Assignments scored by exhaustive enumeration.
    pub evaluated: u64,
    /// Distinct assignments reached the best objective.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Canonical form of the best assignment found.
    pub assignment: CommunityAssignment,
    pub stats: BlockStats,
    pub profile_loglik: f64,
    pub rho_hat: f64,
    pub restarts_used: usize,
    pub swap_count: u64,
    pub search: SearchInfo,
}

impl FitResult {
    fn build(a: &AdjacencyMatrix, labels: Vec<usize>, k: usize, restarts_used: usize, swap_count: u64, search: SearchInfo) -> Result<Self> {
        let assignment = CommunityAssignment::new(labels, k)?;
        let stats = block_stats(a, &assignment)?;
        Ok(FitResult {
            profile_loglik: stats.profile_loglik(),
            rho_hat: stats.rho_hat(),
            assignment,
            stats,
            restarts_used,
            swap_count,
            search,
        })
    }

    /// Confirms the stored likelihood and statistics against `a`.
    pub fn verify(&self, a: &AdjacencyMatrix) -> Result<()> {
        let stats = block_stats(a, &self.assignment)?;
        if stats != self.stats {
            return Err(Error::Invariant("block statistics do not match the graph".into()));
        }
        let ll = stats.profile_loglik();
        if (ll - self.profile_loglik).abs() > 1e-9 * (1.0 + ll.abs()) {
            return Err(Error::Invariant(format!("stored loglik {} differs from recomputed {ll}", self.profile_loglik)));
        }
        Ok(())
    }
}

/// Random admissible assignment: `h_min` nodes per group plus a random
/// spread of the rest, over uniformly shuffled nodes.
pub fn random_assignment(n: usize, k: usize, constraints: Constraints, seed: u64) -> Result<CommunityAssignment> {
    constraints.check_feasible(n, k)?;
    let mut rng = crate::rng::stream_rng(seed, stream::SEARCH);
    CommunityAssignment::new(search::random_admissible(n, k, &constraints, &mut rng), k)
}

/// Local-search maximum profile likelihood fit with `k` groups.
pub fn mple_search(a: &AdjacencyMatrix, k: usize, constraints: Constraints, cfg: &SearchConfig) -> Result<FitResult> {
    let warm = cfg.plan_inputs(a.n(), k, &constraints)?;
    let g = AdjacencyWeights::new(a);
    let plan = RestartPlan {
        restarts: cfg.restarts,
        seed: cfg.seed,
        stream: stream::SEARCH,
        degree_init: cfg.degree_init,
        warm_starts: &warm,
        max_sweeps: cfg.max_sweeps,
        exec: cfg.exec,
    };
    let out = multi_restart(&g, k, &constraints, &plan);
    let info = SearchInfo {
        method: "local".into(),
        seed: cfg.seed,
        relabel_count: out.counts.relabels,
        sweeps: out.counts.sweeps,
        evaluated: 0,
        tied: out.tied,
    };
    FitResult::build(a, out.labels, k, out.restarts, out.counts.swaps, info)
}

/// Global maximiser by enumeration; refuses above [`EXHAUSTIVE_BUDGET`].
pub fn mple_exhaustive(a: &AdjacencyMatrix, k: usize, constraints: Constraints) -> Result<FitResult> {
    mple_exhaustive_with_budget(a, k, constraints, EXHAUSTIVE_BUDGET)
}

pub fn mple_exhaustive_with_budget(a: &AdjacencyMatrix, k: usize, constraints: Constraints, budget: u64) -> Result<FitResult> {
    let g = AdjacencyWeights::new(a);
    let e = exhaustive::enumerate(&g, k, &constraints, budget, |g, z| search::objective_from_scratch(g, z, k))?;
    let info = SearchInfo { method: "exhaustive".into(), seed: 0, relabel_count: 0, sweeps: 0, evaluated: e.evaluated, tied: e.tied };
    FitResult::build(a, e.labels, k, 0, 0, info)
}
