//! Risk functionals: normalized KL risk, oracle risk and aligned graphon MSE.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{bernoulli_kl, oracle_divergence, CommunityAssignment, FitResult};
use crate::error::{Error, Result};
use crate::graphon::{midpoints, Graphon};
use crate::rng::{stream, stream_rng};
use crate::sampler::EdgeProbabilityMatrix;
use crate::step::StepGraphon;

/// Column order of [`RiskReport::write_csv_header`].
pub const CSV_COLUMNS: [&str; 12] = [
    "n",
    "k",
    "rho_n",
    "seed",
    "fitted_risk",
    "oracle_risk",
    "excess_risk",
    "mse_identity",
    "mse_aligned",
    "saturated_fraction",
    "loglik",
    "runtime_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n: usize,
    pub k: usize,
    pub rho_n: f64,
    pub seed: u64,
    pub fitted_risk: f64,
    pub oracle_risk: f64,
    /// `fitted_risk - oracle_risk`, not clamped.
    pub excess_risk: f64,
    pub mse_identity: f64,
    pub mse_aligned: f64,
    pub saturated_fraction: f64,
    pub loglik: f64,
    pub runtime_ms: u64,
    /// Excess risk came out negative, so the oracle minimiser was beaten.
    pub negative_excess: bool,
}

impl RiskReport {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.k.to_string(),
            self.rho_n.to_string(),
            self.seed.to_string(),
            self.fitted_risk.to_string(),
            self.oracle_risk.to_string(),
            self.excess_risk.to_string(),
            self.mse_identity.to_string(),
            self.mse_aligned.to_string(),
            self.saturated_fraction.to_string(),
            self.loglik.to_string(),
            self.runtime_ms.to_string(),
        ]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        out.write_record(self.csv_record())?;
        out.flush()?;
        Ok(())
    }
}

/// Step-function graphon estimate `f_hat(x, y) = Ā_{H^-1(x) H^-1(y)} / rho_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphonEstimate {
    pub step: StepGraphon,
    pub rho_hat: f64,
    pub fit: FitResult,
}

impl GraphonEstimate {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.step.eval(x, y)
    }

    /// Mean of `f_hat(x, .)` over each block's rows.
    pub fn block_degrees(&self) -> Vec<f64> {
        let p = self.step.partition();
        let n = p.n() as f64;
        self.step.values().iter().map(|row| row.iter().zip(p.sizes()).map(|(v, &h)| v * h as f64 / n).sum()).collect()
    }
}

/// Builds the estimate on the fitted partition, blocks in label order.
pub fn build_estimator(fit: &FitResult) -> Result<GraphonEstimate> {
    if !(fit.rho_hat > 0.0) {
        return Err(Error::Undefined("rho_hat = 0, the graph has no edges".into()));
    }
    let (partition, _) = fit.assignment.decompose()?;
    let values = fit.stats.averages.iter().map(|r| r.iter().map(|a| a / fit.rho_hat).collect()).collect();
    Ok(GraphonEstimate { step: StepGraphon::new(partition, values)?, rho_hat: fit.rho_hat, fit: fit.clone() })
}

/// `sum D(p_ij || Ā_{z_i z_j}) / sum p_ij`, both over pairs in unsaturated blocks.
pub fn normalized_kl_risk(p: &EdgeProbabilityMatrix, fit: &FitResult) -> Result<f64> {
    let z = &fit.assignment;
    if p.n() != z.n() {
        return Err(Error::domain(format!("fit has {} nodes but p has {}", z.n(), p.n())));
    }
    let stats = &fit.stats;
    let (mut div, mut mass) = (0.0, 0.0);
    let n = p.n();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (z.label(i), z.label(j));
            if stats.saturated[a][b] {
                continue;
            }
            let pij = p.get(i, j);
            div += bernoulli_kl(pij, stats.averages[a][b])?;
            mass += pij;
        }
    }
    if stats.saturated.iter().flatten().all(|&s| s) {
        return Err(Error::Undefined("every block is saturated".into()));
    }
    Ok(div / mass)
}

/// `sum D(p_ij || p̄_{z_i z_j}) / sum p_ij` over all pairs.
pub fn oracle_risk(p: &EdgeProbabilityMatrix, z: &CommunityAssignment) -> Result<f64> {
    Ok(oracle_divergence(p, z)? / p.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Identity,
    DegreeSort,
    #[default]
    BlockPermutationSearch,
}

impl std::str::FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Alignment::Identity),
            "degree_sort" | "degree-sort" => Ok(Alignment::DegreeSort),
            "block_permutation_search" | "block-permutation-search" | "search" => Ok(Alignment::BlockPermutationSearch),
            _ => Err(Error::config(format!("unknown alignment '{s}'"))),
        }
    }
}

/// Largest `k` for which every block order is tried.
pub const EXHAUSTIVE_ALIGNMENT_K: usize = 8;
const RANDOM_ALIGNMENT_STARTS: usize = 8;

/// Riemann-sum MSE of an estimate against the truth on the midpoint
/// lattice, after reordering the estimate's blocks per `alignment`.
pub fn graphon_mse(truth: &Graphon, est: &GraphonEstimate, grid: usize, alignment: Alignment) -> Result<f64> {
    Ok(aligned_mse(truth, &est.step, grid, alignment)?.0)
}

/// As [`graphon_mse`], also returning the block order used.
pub fn aligned_mse(truth: &Graphon, step: &StepGraphon, grid: usize, alignment: Alignment) -> Result<(f64, Vec<usize>)> {
    if grid < 64 {
        return Err(Error::domain(format!("grid must be at least 64, got {grid}")));
    }
    let lattice = MseLattice::new(truth, step, grid);
    let k = step.k();
    let identity: Vec<usize> = (0..k).collect();
    let degree = degree_order(step);
    Ok(match alignment {
        Alignment::Identity => (lattice.mse(&identity), identity),
        Alignment::DegreeSort => (lattice.mse(&degree), degree),
        Alignment::BlockPermutationSearch if k <= EXHAUSTIVE_ALIGNMENT_K => lattice.exhaustive(),
        Alignment::BlockPermutationSearch => {
            let mut rng = stream_rng(0, stream::ALIGNMENT);
            let mut starts = vec![identity, degree];
            for _ in 0..RANDOM_ALIGNMENT_STARTS {
                let mut o: Vec<usize> = (0..k).collect();
                o.shuffle(&mut rng);
                starts.push(o);
            }
            starts
                .into_iter()
                .map(|s| lattice.descend(s))
                .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)))
                .unwrap()
        }
    })
}

fn degree_order(step: &StepGraphon) -> Vec<usize> {
    let p = step.partition();
    let n = p.n() as f64;
    let deg: Vec<f64> =
        step.values().iter().map(|row| row.iter().zip(p.sizes()).map(|(v, &h)| v * h as f64 / n).sum()).collect();
    let mut order: Vec<usize> = (0..step.k()).collect();
    order.sort_by(|&a, &b| deg[a].total_cmp(&deg[b]).then(a.cmp(&b)));
    order
}

/// Truth on the lattice with 2-D prefix sums, so each block order is
/// scored in `O(k^2)`.
struct MseLattice<'a> {
    step: &'a StepGraphon,
    grid: usize,
    /// `prefix[i * (g + 1) + j]`: sum of truth over cells `[0, i) x [0, j)`.
    prefix: Vec<f64>,
    sum_sq: f64,
}

impl<'a> MseLattice<'a> {
    fn new(truth: &Graphon, step: &'a StepGraphon, grid: usize) -> Self {
        let mid = midpoints(grid);
        let g1 = grid + 1;
        let mut prefix = vec![0.0; g1 * g1];
        let mut sum_sq = 0.0;
        for i in 0..grid {
            let mut row = 0.0;
            for j in 0..grid {
                let f = truth.eval(mid[i], mid[j]);
                sum_sq += f * f;
                row += f;
                prefix[(i + 1) * g1 + j + 1] = prefix[i * g1 + j + 1] + row;
            }
        }
        MseLattice { step, grid, prefix, sum_sq }
    }

    /// Number of midpoints `(2i + 1) / 2g` at or below `c / n`.
    fn cells_below(&self, c: usize, n: usize) -> usize {
        let (c2g, n) = (2 * c * self.grid, n);
        if c2g < n {
            0
        } else {
            ((c2g - n) / (2 * n) + 1).min(self.grid)
        }
    }

    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let g1 = self.grid + 1;
        self.prefix[r1 * g1 + c1] - self.prefix[r0 * g1 + c1] - self.prefix[r1 * g1 + c0] + self.prefix[r0 * g1 + c0]
    }

    fn mse(&self, order: &[usize]) -> f64 {
        let p = self.step.partition();
        let n = p.n();
        let values = self.step.values();
        let mut bounds = Vec::with_capacity(order.len() + 1);
        let mut cum = 0;
        bounds.push(self.cells_below(0, n));
        for &a in order {
            cum += p.sizes()[a];
            bounds.push(self.cells_below(cum, n));
        }
        let mut cross = 0.0;
        let mut est_sq = 0.0;
        for (x, &a) in order.iter().enumerate() {
            let (r0, r1) = (bounds[x], bounds[x + 1]);
            for (y, &b) in order.iter().enumerate() {
                let (c0, c1) = (bounds[y], bounds[y + 1]);
                let v = values[a][b];
                cross += v * self.rect(r0, r1, c0, c1);
                est_sq += v * v * ((r1 - r0) * (c1 - c0)) as f64;
            }
        }
        ((self.sum_sq - 2.0 * cross + est_sq) / (self.grid * self.grid) as f64).max(0.0)
    }

    fn exhaustive(&self) -> (f64, Vec<usize>) {
        let k = self.step.k();
        let mut order: Vec<usize> = (0..k).collect();
        let mut best = (self.mse(&order), order.clone());
        // Heap's algorithm
        let mut c = vec![0; k];
        let mut i = 0;
        while i < k {
            if c[i] < i {
                if i % 2 == 0 {
                    order.swap(0, i);
                } else {
                    order.swap(c[i], i);
                }
                let m = self.mse(&order);
                if m < best.0 || (m == best.0 && order < best.1) {
                    best = (m, order.clone());
                }
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    /// Best-improvement pairwise swaps until none helps.
    fn descend(&self, mut order: Vec<usize>) -> (f64, Vec<usize>) {
        let k = order.len();
        let mut cur = self.mse(&order);
        loop {
            let mut best = (cur, None);
            for x in 0..k {
                for y in x + 1..k {
                    order.swap(x, y);
                    let m = self.mse(&order);
                    order.swap(x, y);
                    if m < best.0 - 1e-15 {
                        best = (m, Some((x, y)));
                    }
                }
            }
            match best.1 {
                Some((x, y)) => {
                    order.swap(x, y);
                    cur = best.0;
                }
                None => return (cur, order),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    /// Relative error of the inequality with the least slack.
    pub lhs: f64,
    pub bound: f64,
    pub ok: bool,
    /// `bound - lhs`, minimised over both inequalities.
    pub slack: f64,
    pub forward: (f64, f64),
    pub reverse: (f64, f64),
}

/// Evaluates the two second-order Taylor bounds on `D(p || p + delta)` and
/// `D(p + delta || p)` relative to `delta^2 / (2 p (1 - p))`.
pub fn kl_taylor_check(p: f64, delta: f64) -> Result<TaylorCheck> {
    kl_taylor_check_with(p, delta, bernoulli_kl)
}

/// As [`kl_taylor_check`] with a caller-supplied divergence.
pub fn kl_taylor_check_with(p: f64, delta: f64, kl: impl Fn(f64, f64) -> Result<f64>) -> Result<TaylorCheck> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p = {p} is not in (0, 1)")));
    }
    let m = p.min(1.0 - p);
    if !(delta.abs() < m) {
        return Err(Error::domain(format!("|delta| = {} is not below min(p, 1 - p) = {m}", delta.abs())));
    }
    if delta == 0.0 {
        return Ok(TaylorCheck { lhs: 0.0, bound: 0.0, ok: true, slack: 0.0, forward: (0.0, 0.0), reverse: (0.0, 0.0) });
    }
    let quad = delta * delta / (2.0 * p * (1.0 - p));
    let t = delta.abs() / m;
    let cube = (1.0 - t).powi(-3);
    let forward = ((kl(p, p + delta)? - quad).abs() / quad, 2.0 / 3.0 * t * cube);
    let reverse = ((kl(p + delta, p)? - quad).abs() / quad, t * (1.0 + 2.0 / 3.0 * (1.0 + 2.0 * t) * cube));
    let worst = if forward.1 - forward.0 <= reverse.1 - reverse.0 { forward } else { reverse };
    let slack = worst.1 - worst.0;
    Ok(TaylorCheck { lhs: worst.0, bound: worst.1, ok: slack >= -1e-12, slack, forward, reverse })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCheck {
    /// `|f - g|^2`.
    pub lhs: f64,
    /// `2 f D(rho f || rho g) / rho`.
    pub rhs: f64,
    /// `2 max(f, g) D(rho f || rho g) / rho`.
    pub rhs_max: f64,
}

impl QuadraticCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300
    }

    pub fn holds_max(&self) -> bool {
        self.lhs <= self.rhs_max * (1.0 + 1e-12) + 1e-300
    }
}

/// Quadratic lower bound on the scaled divergence `D(rho f || rho g)`. The
/// `f`-weighted form only holds for `f >= g`; the `max(f, g)` form holds
/// throughout.
pub fn quadratic_bound_check(f: f64, g: f64, rho: f64) -> Result<QuadraticCheck> {
    if !(f > 0.0 && g > 0.0 && rho > 0.0 && rho * f < 1.0 && rho * g < 1.0) {
        return Err(Error::domain(format!("need f, g, rho > 0 and rho f, rho g < 1; got f = {f}, g = {g}, rho = {rho}")));
    }
    let d = bernoulli_kl(rho * f, rho * g)? / rho;
    Ok(QuadraticCheck { lhs: (f - g) * (f - g), rhs: 2.0 * f * d, rhs_max: 2.0 * f.max(g) * d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::{mple_search, Constraints, SearchConfig};
    use crate::sampler::AdjacencyMatrix;
    use crate::partition::Partition;
    use approx::assert_abs_diff_eq;

    fn fit_of(a: &AdjacencyMatrix, labels: &[usize], k: usize) -> FitResult {
        let z = CommunityAssignment::new(labels.to_vec(), k).unwrap();
        // a warm start with no sweeps pins the grouping
        let cfg = SearchConfig { max_sweeps: 0, ..SearchConfig::new(1, 0) }.with_warm_starts(vec![z]);
        mple_search(a, k, Constraints::default(), &cfg).unwrap()
    }

    #[test]
    fn estimator_examples() {
        let complete: Vec<_> = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).collect();
        let a = AdjacencyMatrix::from_edges(6, &complete).unwrap();
        let est = build_estimator(&fit_of(&a, &[0; 6], 1)).unwrap();
        assert_eq!(est.eval(0.3, 0.8), 1.0);

        let a = AdjacencyMatrix::from_edges(4, &[(0, 2), (0, 3), (0, 1), (2, 3)]).unwrap();
        let est = build_estimator(&fit_of(&a, &[0, 0, 1, 1], 2)).unwrap();
        assert_abs_diff_eq!(est.rho_hat, 4.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.step.values()[0][0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(est.step.values()[1][1], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(est.step.values()[0][1], 0.75, epsilon = 1e-12);

        let empty = AdjacencyMatrix::from_edges(4, &[]).unwrap();
        assert!(matches!(build_estimator(&fit_of(&empty, &[0, 0, 1, 1], 2)), Err(Error::Undefined(_))));
    }

    #[test]
    fn kl_risk_examples() {
        // single block with Ā = 0.25 and p = 0.5
        let a = AdjacencyMatrix::from_edges(4, &[(0, 1)]).unwrap();
        let mut fit = fit_of(&a, &[0; 4], 1);
        let half = EdgeProbabilityMatrix::from_fn(4, 1.0, |_, _| 0.5).unwrap();
        fit.stats.averages[0][0] = 0.25;
        fit.stats.saturated[0][0] = false;
        assert_abs_diff_eq!(normalized_kl_risk(&half, &fit).unwrap(), 0.287682072451781, epsilon = 1e-12);

        let sat = fit_of(&AdjacencyMatrix::from_edges(4, &[]).unwrap(), &[0, 0, 1, 1], 2);
        assert!(matches!(normalized_kl_risk(&half, &sat), Err(Error::Undefined(_))));
    }

    #[test]
    fn oracle_risk_examples() {
        let p = EdgeProbabilityMatrix::from_fn(4, 1.0, |i, j| match (i, j) {
            (0, 2) => 0.1,
            (0, 3) => 0.2,
            (1, 2) => 0.3,
            (1, 3) => 0.4,
            _ => 0.5,
        })
        .unwrap();
        let z = CommunityAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let mut d = 0.0;
        for q in [0.1f64, 0.2, 0.3, 0.4] {
            d += q * (q / 0.25).ln() + (1.0 - q) * ((1.0 - q) / 0.75).ln();
        }
        let mass = 0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.5;
        assert_abs_diff_eq!(oracle_risk(&p, &z).unwrap(), d / mass, epsilon = 1e-14);

        let c = EdgeProbabilityMatrix::from_fn(6, 1.0, |_, _| 0.2).unwrap();
        let z = CommunityAssignment::new(vec![1, 0, 1, 0, 1, 0], 2).unwrap();
        assert!(oracle_risk(&c, &z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mse_examples() {
        let p = Partition::new(vec![5, 5]).unwrap();
        let vals = vec![vec![1.6, 0.4], vec![0.4, 1.2]];
        let step = StepGraphon::new(p.clone(), vals.clone()).unwrap();
        let truth = Graphon::from_step(&step);
        for al in [Alignment::Identity, Alignment::DegreeSort, Alignment::BlockPermutationSearch] {
            let m = aligned_mse(&truth, &step, 64, al).unwrap().0;
            if al != Alignment::DegreeSort {
                assert!(m < 1e-15, "{al:?} {m}");
            }
        }
        let swapped = step.permuted(&[1, 0]);
        assert!(aligned_mse(&truth, &swapped, 64, Alignment::Identity).unwrap().0 > 0.05);
        assert!(aligned_mse(&truth, &swapped, 64, Alignment::BlockPermutationSearch).unwrap().0 < 1e-15);

        let half = StepGraphon::new(Partition::new(vec![3, 4, 3]).unwrap(), vec![vec![0.5; 3]; 3]).unwrap();
        for al in [Alignment::Identity, Alignment::DegreeSort, Alignment::BlockPermutationSearch] {
            assert_abs_diff_eq!(aligned_mse(&Graphon::constant(1.0), &half, 64, al).unwrap().0, 0.25, epsilon = 1e-12);
        }
        assert!(aligned_mse(&truth, &step, 32, Alignment::Identity).is_err());
    }

    #[test]
    fn lattice_matches_direct_riemann_sum() {
        let step = StepGraphon::new(
            Partition::new(vec![3, 7, 2, 5]).unwrap(),
            vec![vec![0.1, 0.9, 0.4, 1.2], vec![0.9, 0.3, 0.8, 0.2], vec![0.4, 0.8, 1.5, 0.6], vec![1.2, 0.2, 0.6, 0.7]],
        )
        .unwrap();
        let truth = Graphon::cosine();
        for order in [[0, 1, 2, 3], [2, 0, 3, 1], [3, 2, 1, 0]] {
            let perm = step.permuted(&order);
            let mid = midpoints(100);
            let mut direct = 0.0;
            for &x in &mid {
                for &y in &mid {
                    direct += (truth.eval(x, y) - perm.eval(x, y)).powi(2);
                }
            }
            direct /= 1e4;
            let lattice = MseLattice::new(&truth, &step, 100);
            assert_abs_diff_eq!(lattice.mse(&order), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn search_beats_or_matches_other_alignments() {
        let k = 11;
        let vals: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| 0.5 + ((a * b) % 5) as f64 / 5.0).collect()).collect();
        let step = StepGraphon::new(Partition::new(vec![3; k]).unwrap(), vals).unwrap();
        let truth = Graphon::bilinear();
        let id = aligned_mse(&truth, &step, 64, Alignment::Identity).unwrap().0;
        let deg = aligned_mse(&truth, &step, 64, Alignment::DegreeSort).unwrap().0;
        let (s, order) = aligned_mse(&truth, &step, 64, Alignment::BlockPermutationSearch).unwrap();
        assert!(s <= id && s <= deg);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..k).collect::<Vec<_>>());
    }

    #[test]
    fn taylor_examples() {
        let zero = kl_taylor_check(0.3, 0.0).unwrap();
        assert_eq!((zero.lhs, zero.bound, zero.ok), (0.0, 0.0, true));

        let c = kl_taylor_check(0.5, 0.1).unwrap();
        assert_abs_diff_eq!(c.forward.1, 0.260416666666667, epsilon = 1e-12);
        let d = 0.5 * (0.5f64 / 0.6).ln() + 0.5 * (0.5f64 / 0.4).ln();
        assert_abs_diff_eq!(c.forward.0, (d - 0.02).abs() / 0.02, epsilon = 1e-12);
        assert!(c.ok);

        let c = kl_taylor_check(0.1, 0.05).unwrap();
        assert_abs_diff_eq!(c.forward.1, 8.0 / 3.0, epsilon = 1e-12);
        assert!(c.ok);

        assert!(kl_taylor_check(0.1, 0.1).is_err());
        assert!(kl_taylor_check(0.0, 0.0).is_err());

        let broken = kl_taylor_check_with(0.5, 0.1, |p, q| Ok(2.0 * bernoulli_kl(p, q)?)).unwrap();
        assert!(!broken.ok);
    }

    #[test]
    fn quadratic_bound_forms() {
        let c = quadratic_bound_check(0.9, 0.1, 1.0).unwrap();
        assert!(c.holds() && c.holds_max());
        let c = quadratic_bound_check(0.1, 0.9, 1.0).unwrap();
        assert!(!c.holds());
        assert!(c.holds_max());
        assert!(quadratic_bound_check(0.5, 0.5, 2.5).is_err());
    }
}
