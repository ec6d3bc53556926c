use serde::{Deserialize, Serialize};

use super::assignment::CommunityAssignment;
use crate::error::{Error, Result};
use crate::sampler::AdjacencyMatrix;

/// `x ln y` with `0 ln y = 0`.
#[inline]
pub(crate) fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `t ln t + (1 - t) ln(1 - t)`, zero at both endpoints.
#[inline]
pub(crate) fn neg_entropy(t: f64) -> f64 {
    xlny(t, t) + xlny(1.0 - t, 1.0 - t)
}

/// Bernoulli divergence `D(p || q)` in nats.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::domain(format!("p = {p} is not in [0, 1]")));
    }
    if q.is_nan() || !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("q = {q} is not in (0, 1)")));
    }
    if q == 0.0 || q == 1.0 {
        return Err(Error::InfiniteDivergence { p, q });
    }
    Ok((xlny(p, p / q) + xlny(1.0 - p, (1.0 - p) / (1.0 - q))).max(0.0))
}

/// Pair count `h_ab^2`: `C(h_a, 2)` on the diagonal, `h_a h_b` off it.
#[inline]
pub(crate) fn block_pairs(sizes: &[usize], a: usize, b: usize) -> u64 {
    let (ha, hb) = (sizes[a] as u64, sizes[b] as u64);
    if a == b {
        ha * ha.saturating_sub(1) / 2
    } else {
        ha * hb
    }
}

/// Per-block counts for an adjacency matrix under an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub sizes: Vec<usize>,
    pub pair_counts: Vec<Vec<u64>>,
    pub edge_sums: Vec<Vec<u64>>,
    pub averages: Vec<Vec<f64>>,
    /// `averages[a][b]` is 0 or 1.
    pub saturated: Vec<Vec<bool>>,
}

impl BlockStats {
    pub(crate) fn from_counts(sizes: Vec<usize>, edge_sums: Vec<Vec<u64>>) -> Self {
        let k = sizes.len();
        let pair_counts: Vec<Vec<u64>> =
            (0..k).map(|a| (0..k).map(|b| block_pairs(&sizes, a, b)).collect()).collect();
        let averages: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| edge_sums[a][b] as f64 / pair_counts[a][b] as f64).collect())
            .collect();
        let saturated = (0..k)
            .map(|a| (0..k).map(|b| edge_sums[a][b] == 0 || edge_sums[a][b] == pair_counts[a][b]).collect())
            .collect();
        BlockStats { sizes, pair_counts, edge_sums, averages, saturated }
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// Fraction of unordered blocks `a <= b` whose average is 0 or 1.
    pub fn saturated_fraction(&self) -> f64 {
        let k = self.k();
        let count = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).filter(|&(a, b)| self.saturated[a][b]).count();
        count as f64 / (k * (k + 1) / 2) as f64
    }

    /// Edge density `rho_hat = sum A / C(n, 2)`.
    pub fn rho_hat(&self) -> f64 {
        let k = self.k();
        let (mut e, mut m) = (0u64, 0u64);
        for a in 0..k {
            for b in a..k {
                e += self.edge_sums[a][b];
                m += self.pair_counts[a][b];
            }
        }
        e as f64 / m as f64
    }

    /// Block form of the profile log-likelihood; saturated blocks add 0.
    pub fn profile_loglik(&self) -> f64 {
        let k = self.k();
        let mut terms = Vec::with_capacity(k * (k + 1) / 2);
        for a in 0..k {
            for b in a..k {
                if !self.saturated[a][b] {
                    terms.push(self.pair_counts[a][b] as f64 * neg_entropy(self.averages[a][b]));
                }
            }
        }
        // summing in sorted order makes the result exactly label-invariant
        terms.sort_by(f64::total_cmp);
        terms.iter().sum::<f64>() + 0.0
    }
}

fn check_groups(z: &CommunityAssignment) -> Result<Vec<usize>> {
    let sizes = z.sizes();
    if let Some(a) = sizes.iter().position(|&h| h < 2) {
        return Err(Error::constraint(format!("group {a} has {} node(s); every group needs at least 2", sizes[a])));
    }
    Ok(sizes)
}

pub fn block_stats(a: &AdjacencyMatrix, z: &CommunityAssignment) -> Result<BlockStats> {
    if a.n() != z.n() {
        return Err(Error::domain(format!("assignment has {} labels but the graph has {} nodes", z.n(), a.n())));
    }
    let sizes = check_groups(z)?;
    let k = z.k();
    let mut sums = vec![vec![0u64; k]; k];
    for (i, j) in a.edges() {
        let (x, y) = (z.label(i), z.label(j));
        sums[x][y] += 1;
        if x != y {
            sums[y][x] += 1;
        }
    }
    Ok(BlockStats::from_counts(sizes, sums))
}

pub fn profile_log_likelihood(a: &AdjacencyMatrix, z: &CommunityAssignment) -> Result<f64> {
    Ok(block_stats(a, z)?.profile_loglik())
}

/// Per-pair form `sum_{i<j} [A ln theta + (1 - A) ln(1 - theta)]` at
/// `theta = Ā_{z_i z_j}`. Agrees with [`profile_log_likelihood`] up to rounding.
pub fn pairwise_log_likelihood(a: &AdjacencyMatrix, z: &CommunityAssignment) -> Result<f64> {
    let stats = block_stats(a, z)?;
    log_likelihood_at(a, z, &stats.averages)
}

/// Blockmodel log-likelihood at arbitrary block parameters `theta`.
pub fn log_likelihood_at(a: &AdjacencyMatrix, z: &CommunityAssignment, theta: &[Vec<f64>]) -> Result<f64> {
    if a.n() != z.n() {
        return Err(Error::domain("assignment and graph sizes differ"));
    }
    let n = a.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let t = theta[z.label(i)][z.label(j)];
            let x = if a.has_edge(i, j) { 1.0 } else { 0.0 };
            total += xlny(x, t) + xlny(1.0 - x, 1.0 - t);
        }
    }
    Ok(total)
}

/// `sum_{i<j} D(A_ij || Ā_{z_i z_j})` over unsaturated blocks.
pub fn divergence_objective(a: &AdjacencyMatrix, z: &CommunityAssignment) -> Result<f64> {
    let stats = block_stats(a, z)?;
    let n = a.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (z.label(i), z.label(j));
            if stats.saturated[x][y] {
                continue;
            }
            let e = if a.has_edge(i, j) { 1.0 } else { 0.0 };
            total += bernoulli_kl(e, stats.averages[x][y])?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z(labels: &[usize], k: usize) -> CommunityAssignment {
        CommunityAssignment::new(labels.to_vec(), k).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(bernoulli_kl(0.5, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(bernoulli_kl(1.0, 0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(bernoulli_kl(0.5, 0.25).unwrap(), 0.143841036225890, epsilon = 1e-12);
        assert!(matches!(bernoulli_kl(0.3, 0.0), Err(Error::InfiniteDivergence { .. })));
        assert!(matches!(bernoulli_kl(0.3, 1.0), Err(Error::InfiniteDivergence { .. })));
        assert!(matches!(bernoulli_kl(1.3, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn block_stats_examples() {
        // 0-based: A_02 = A_03 = 1, A_12 = A_13 = 0, A_01 = A_23 = 1
        let a = AdjacencyMatrix::from_edges(4, &[(0, 2), (0, 3), (0, 1), (2, 3)]).unwrap();
        let s = block_stats(&a, &z(&[0, 0, 1, 1], 2)).unwrap();
        assert_eq!(s.averages[0][1], 0.5);
        assert_eq!(s.pair_counts[0][0], 1);
        assert_eq!(s.pair_counts[0][1], 4);
        assert_eq!(s.averages[0][0], 1.0);
        assert_abs_diff_eq!(s.profile_loglik(), -4.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.profile_loglik(), -2.772589, epsilon = 1e-6);

        let complete: Vec<_> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let a = AdjacencyMatrix::from_edges(5, &complete).unwrap();
        let s = block_stats(&a, &z(&[0, 0, 1, 1, 1], 2)).unwrap();
        assert!(s.averages.iter().flatten().all(|&x| x == 1.0));
        assert!(s.saturated.iter().flatten().all(|&x| x));
        assert_eq!(s.profile_loglik(), 0.0);
    }

    #[test]
    fn small_groups_rejected() {
        let a = AdjacencyMatrix::from_edges(4, &[]).unwrap();
        assert!(matches!(block_stats(&a, &z(&[0, 0, 0, 1], 2)), Err(Error::Constraint(_))));
        assert!(matches!(block_stats(&a, &z(&[0, 0, 1, 1], 3)), Err(Error::Constraint(_))));
    }

    #[test]
    fn single_block_is_density_entropy() {
        let a = AdjacencyMatrix::from_edges(6, &[(0, 1), (1, 2), (3, 5), (2, 4)]).unwrap();
        let rho = 4.0 / 15.0;
        let expected = 15.0 * (rho * f64::ln(rho) + (1.0 - rho) * f64::ln(1.0 - rho));
        assert_abs_diff_eq!(profile_log_likelihood(&a, &z(&[0; 6], 1)).unwrap(), expected, epsilon = 1e-12);
    }
}
