use serde::{Deserialize, Serialize};

use super::assignment::{CommunityAssignment, Constraints};
use super::exhaustive::{enumerate, EXHAUSTIVE_BUDGET};
use super::search::{self, multi_restart, ProbabilityWeights, RestartPlan};
use super::stats::bernoulli_kl;
use super::SearchConfig;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::sampler::EdgeProbabilityMatrix;

/// Oracle block means `p̄_ab`: averages of the true `p_ij` over each block.
pub fn oracle_block_means(p: &EdgeProbabilityMatrix, z: &CommunityAssignment) -> Result<Vec<Vec<f64>>> {
    if p.n() != z.n() {
        return Err(Error::domain(format!("assignment has {} labels but p has {} nodes", z.n(), p.n())));
    }
    let sizes = z.sizes();
    if let Some(a) = sizes.iter().position(|&h| h < 2) {
        return Err(Error::constraint(format!("group {a} has {} node(s); every group needs at least 2", sizes[a])));
    }
    let k = z.k();
    let sums = search::block_sums(&ProbabilityWeights::new(p), z.labels(), k);
    Ok((0..k)
        .map(|a| (0..k).map(|b| sums[a * k + b] / super::stats::block_pairs(&sizes, a, b) as f64).collect())
        .collect())
}

/// `sum_{i<j} D(p_ij || p̄_{z_i z_j})`.
pub fn oracle_divergence(p: &EdgeProbabilityMatrix, z: &CommunityAssignment) -> Result<f64> {
    let means = oracle_block_means(p, z)?;
    let n = p.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += bernoulli_kl(p.get(i, j), means[z.label(i)][z.label(j)])?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFit {
    pub assignment: CommunityAssignment,
    /// Divergence sum at `assignment`.
    pub divergence: f64,
    pub restarts_used: usize,
    pub tied: bool,
}

/// Local-search minimiser of the oracle divergence sum. Same moves,
/// restarts and tie-breaking as [`super::mple_search`].
pub fn oracle_mple(p: &EdgeProbabilityMatrix, k: usize, constraints: Constraints, cfg: &SearchConfig) -> Result<OracleFit> {
    let warm = cfg.plan_inputs(p.n(), k, &constraints)?;
    let g = ProbabilityWeights::new(p);
    let plan = RestartPlan {
        restarts: cfg.restarts,
        seed: cfg.seed,
        stream: stream::ORACLE_SEARCH,
        degree_init: cfg.degree_init,
        warm_starts: &warm,
        max_sweeps: cfg.max_sweeps,
        exec: cfg.exec,
    };
    let out = multi_restart(&g, k, &constraints, &plan);
    let assignment = CommunityAssignment::new(out.labels, k)?;
    Ok(OracleFit { divergence: oracle_divergence(p, &assignment)?, assignment, restarts_used: out.restarts, tied: out.tied })
}

/// Exact oracle minimiser by enumeration.
pub fn oracle_exhaustive(p: &EdgeProbabilityMatrix, k: usize, constraints: Constraints) -> Result<OracleFit> {
    let g = ProbabilityWeights::new(p);
    let e = enumerate(&g, k, &constraints, EXHAUSTIVE_BUDGET, |g, z| search::objective_from_scratch(g, z, k))?;
    let assignment = CommunityAssignment::new(e.labels, k)?;
    Ok(OracleFit { divergence: oracle_divergence(p, &assignment)?, assignment, restarts_used: 0, tied: e.tied })
}
