//! Local search over community assignments.
//!
//! The engine is generic over a [`Weights`] source so the same moves serve
//! both the profile likelihood (0/1 adjacency) and the oracle divergence
//! (real edge probabilities). For a fixed assignment the objective is
//! `sum_{a<=b} N_ab phi(S_ab / N_ab)` with `phi(t) = t ln t + (1-t) ln(1-t)`,
//! `N_ab` the block pair count and `S_ab` the block weight sum.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::assignment::Constraints;
use super::stats::{block_pairs, neg_entropy};
use crate::exec::{map_indexed, Execution};
use crate::rng::{derive_seed, stream_rng};
use crate::sampler::{AdjacencyMatrix, EdgeProbabilityMatrix};

/// Largest pair count for which `x ln x` is tabulated.
const TABLE_LIMIT: usize = 1 << 22;

pub(crate) trait Weights: Sync {
    fn n(&self) -> usize;
    fn weight(&self, u: usize, v: usize) -> f64;
    fn for_each_neighbor(&self, v: usize, f: impl FnMut(usize, f64));
    /// Contribution `N phi(S / N)` of one block; 0 when `N = 0`.
    fn term(&self, pairs: u64, sum: f64) -> f64;

    fn degree(&self, v: usize) -> f64 {
        let mut d = 0.0;
        self.for_each_neighbor(v, |_, w| d += w);
        d
    }
}

pub(crate) struct AdjacencyWeights<'a> {
    a: &'a AdjacencyMatrix,
    xlnx: Option<Vec<f64>>,
}

impl<'a> AdjacencyWeights<'a> {
    pub(crate) fn new(a: &'a AdjacencyMatrix) -> Self {
        let max_pairs = a.n() * a.n().saturating_sub(1) / 2;
        let xlnx = (max_pairs < TABLE_LIMIT)
            .then(|| (0..=max_pairs).map(|x| if x == 0 { 0.0 } else { x as f64 * (x as f64).ln() }).collect());
        AdjacencyWeights { a, xlnx }
    }
}

impl Weights for AdjacencyWeights<'_> {
    fn n(&self) -> usize {
        self.a.n()
    }

    fn weight(&self, u: usize, v: usize) -> f64 {
        if self.a.has_edge(u, v) {
            1.0
        } else {
            0.0
        }
    }

    fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        for w in self.a.neighbors(v) {
            f(w, 1.0);
        }
    }

    #[inline]
    fn term(&self, pairs: u64, sum: f64) -> f64 {
        if pairs == 0 {
            return 0.0;
        }
        let e = sum as u64;
        match &self.xlnx {
            Some(t) => t[e as usize] + t[(pairs - e) as usize] - t[pairs as usize],
            None => pairs as f64 * neg_entropy(e as f64 / pairs as f64),
        }
    }
}

pub(crate) struct ProbabilityWeights<'a> {
    p: &'a EdgeProbabilityMatrix,
}

impl<'a> ProbabilityWeights<'a> {
    pub(crate) fn new(p: &'a EdgeProbabilityMatrix) -> Self {
        ProbabilityWeights { p }
    }
}

impl Weights for ProbabilityWeights<'_> {
    fn n(&self) -> usize {
        self.p.n()
    }

    fn weight(&self, u: usize, v: usize) -> f64 {
        self.p.get(u, v)
    }

    fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        for w in 0..self.p.n() {
            if w != v {
                f(w, self.p.get(v, w));
            }
        }
    }

    #[inline]
    fn term(&self, pairs: u64, sum: f64) -> f64 {
        if pairs == 0 {
            return 0.0;
        }
        let t = (sum / pairs as f64).clamp(0.0, 1.0);
        pairs as f64 * neg_entropy(t)
    }
}

/// Block weight sums `S_ab` (full symmetric `k x k`, row-major).
pub(crate) fn block_sums<W: Weights>(g: &W, labels: &[usize], k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k * k];
    for v in 0..g.n() {
        let a = labels[v];
        g.for_each_neighbor(v, |w, x| {
            if w > v {
                let b = labels[w];
                s[a * k + b] += x;
                if a != b {
                    s[b * k + a] += x;
                }
            }
        });
    }
    s
}

pub(crate) fn objective_from_scratch<W: Weights>(g: &W, labels: &[usize], k: usize) -> f64 {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let s = block_sums(g, labels, k);
    let mut total = 0.0;
    for a in 0..k {
        for b in a..k {
            total += g.term(block_pairs(&sizes, a, b), s[a * k + b]);
        }
    }
    total
}

/// Acceptance threshold for an objective over `n` nodes.
pub(crate) fn tolerance(n: usize) -> f64 {
    1e-9 * (1.0 + (n * n.saturating_sub(1) / 2) as f64)
}

/// Incrementally maintained search state.
pub(crate) struct State<'g, W> {
    g: &'g W,
    k: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    /// `S_ab`, symmetric.
    sums: Vec<f64>,
    /// `nbr[v * k + c]`: weight from `v` to the other members of group `c`.
    nbr: Vec<f64>,
    terms: Vec<f64>,
    row_total: Vec<f64>,
    objective: f64,
}

impl<'g, W: Weights> State<'g, W> {
    pub(crate) fn new(g: &'g W, labels: Vec<usize>, k: usize) -> Self {
        let n = g.n();
        let mut sizes = vec![0; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut nbr = vec![0.0; n * k];
        for v in 0..n {
            let row = &mut nbr[v * k..(v + 1) * k];
            g.for_each_neighbor(v, |w, x| row[labels[w]] += x);
        }
        let sums = block_sums(g, &labels, k);
        let mut st = State {
            g,
            k,
            labels,
            sizes,
            sums,
            nbr,
            terms: vec![0.0; k * k],
            row_total: vec![0.0; k],
            objective: 0.0,
        };
        st.refresh_terms(0..k);
        st
    }

    pub(crate) fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[cfg(test)]
    pub(crate) fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[cfg(test)]
    pub(crate) fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub(crate) fn objective(&self) -> f64 {
        self.objective
    }

    fn refresh_terms(&mut self, rows: impl IntoIterator<Item = usize>) {
        let k = self.k;
        for a in rows {
            for c in 0..k {
                let t = self.g.term(block_pairs(&self.sizes, a, c), self.sums[a * k + c]);
                self.terms[a * k + c] = t;
                self.terms[c * k + a] = t;
            }
        }
        let mut obj = 0.0;
        for a in 0..k {
            self.row_total[a] = self.terms[a * k..(a + 1) * k].iter().sum();
            obj += self.terms[a * k + a..(a + 1) * k].iter().sum::<f64>();
        }
        self.objective = obj;
    }

    #[inline]
    fn pairs(ha: usize, hb: usize, same: bool) -> u64 {
        if same {
            (ha * ha.saturating_sub(1) / 2) as u64
        } else {
            (ha * hb) as u64
        }
    }

    fn old_rows(&self, a: usize, b: usize) -> f64 {
        self.row_total[a] + self.row_total[b] - self.terms[a * self.k + b]
    }

    /// Objective change from moving `v` into group `b`.
    pub(crate) fn relabel_delta(&self, v: usize, b: usize) -> f64 {
        let k = self.k;
        let a = self.labels[v];
        let d = &self.nbr[v * k..(v + 1) * k];
        let s = &self.sums;
        let (ha, hb) = (self.sizes[a] - 1, self.sizes[b] + 1);
        let mut new = self.g.term(Self::pairs(ha, ha, true), s[a * k + a] - d[a])
            + self.g.term(Self::pairs(hb, hb, true), s[b * k + b] + d[b])
            + self.g.term(Self::pairs(ha, hb, false), s[a * k + b] - d[b] + d[a]);
        for c in 0..k {
            if c != a && c != b {
                let hc = self.sizes[c];
                new += self.g.term(Self::pairs(ha, hc, false), s[a * k + c] - d[c])
                    + self.g.term(Self::pairs(hb, hc, false), s[b * k + c] + d[c]);
            }
        }
        new - self.old_rows(a, b)
    }

    /// Objective change from exchanging the labels of `u` and `v`.
    pub(crate) fn swap_delta(&self, u: usize, v: usize) -> f64 {
        let k = self.k;
        let (a, b) = (self.labels[u], self.labels[v]);
        if a == b {
            return 0.0;
        }
        let du = &self.nbr[u * k..(u + 1) * k];
        let dv = &self.nbr[v * k..(v + 1) * k];
        let s = &self.sums;
        let w = self.g.weight(u, v);
        let (ha, hb) = (self.sizes[a], self.sizes[b]);
        let mut new = self.terms_at(a, a, s[a * k + a] - du[a] + dv[a] - w)
            + self.terms_at(b, b, s[b * k + b] - dv[b] + du[b] - w)
            + self.g.term(Self::pairs(ha, hb, false), s[a * k + b] + du[a] - du[b] + dv[b] - dv[a] + 2.0 * w);
        for c in 0..k {
            if c != a && c != b {
                let x = dv[c] - du[c];
                new += self.terms_at(a, c, s[a * k + c] + x) + self.terms_at(b, c, s[b * k + c] - x);
            }
        }
        new - self.old_rows(a, b)
    }

    #[inline]
    fn terms_at(&self, a: usize, c: usize, sum: f64) -> f64 {
        self.g.term(block_pairs(&self.sizes, a, c), sum)
    }

    fn move_node(&mut self, v: usize, b: usize) {
        let k = self.k;
        let a = self.labels[v];
        for c in 0..k {
            let x = self.nbr[v * k + c];
            self.sums[a * k + c] -= x;
            if c != a {
                self.sums[c * k + a] = self.sums[a * k + c];
            }
        }
        for c in 0..k {
            let x = self.nbr[v * k + c];
            self.sums[b * k + c] += x;
            if c != b {
                self.sums[c * k + b] = self.sums[b * k + c];
            }
        }
        self.sizes[a] -= 1;
        self.sizes[b] += 1;
        self.labels[v] = b;
        let nbr = &mut self.nbr;
        self.g.for_each_neighbor(v, |w, x| {
            nbr[w * k + a] -= x;
            nbr[w * k + b] += x;
        });
    }

    pub(crate) fn apply_relabel(&mut self, v: usize, b: usize) {
        let a = self.labels[v];
        self.move_node(v, b);
        self.refresh_terms([a, b]);
    }

    pub(crate) fn apply_swap(&mut self, u: usize, v: usize) {
        let (a, b) = (self.labels[u], self.labels[v]);
        self.move_node(u, b);
        self.move_node(v, a);
        self.refresh_terms([a, b]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Move {
    Relabel(usize, usize),
    Swap(usize, usize),
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct MoveCounts {
    pub relabels: u64,
    pub swaps: u64,
    pub sweeps: u64,
}

/// Node-wise best-improvement descent until a full sweep accepts nothing.
pub(crate) fn local_search<W: Weights>(
    st: &mut State<'_, W>,
    constraints: &Constraints,
    rng: &mut ChaCha8Rng,
    max_sweeps: u64,
    mut on_move: impl FnMut(&State<'_, W>, Move),
) -> MoveCounts {
    let n = st.g.n();
    let k = st.k;
    let h_min = constraints.h_min;
    let h_max = constraints.h_max_for(n);
    let eps = tolerance(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut counts = MoveCounts::default();
    if k < 2 {
        return counts;
    }
    while counts.sweeps < max_sweeps {
        counts.sweeps += 1;
        order.shuffle(rng);
        let mut improved = false;
        for &v in &order {
            let a = st.labels[v];
            let mut best = eps;
            let mut choice = None;
            if st.sizes[a] > h_min {
                for b in 0..k {
                    if b != a && st.sizes[b] < h_max {
                        let d = st.relabel_delta(v, b);
                        if d > best {
                            best = d;
                            choice = Some(Move::Relabel(v, b));
                        }
                    }
                }
            }
            for u in 0..n {
                if st.labels[u] != a {
                    let d = st.swap_delta(v, u);
                    if d > best {
                        best = d;
                        choice = Some(Move::Swap(v, u));
                    }
                }
            }
            match choice {
                Some(Move::Relabel(v, b)) => {
                    st.apply_relabel(v, b);
                    counts.relabels += 1;
                }
                Some(Move::Swap(v, u)) => {
                    st.apply_swap(v, u);
                    counts.swaps += 1;
                }
                None => continue,
            }
            improved = true;
            on_move(st, choice.unwrap());
        }
        if !improved {
            break;
        }
    }
    counts
}

/// Uniformly shuffled nodes laid into groups whose sizes are `h_min` plus a
/// random spread of the remainder.
pub(crate) fn random_admissible(n: usize, k: usize, constraints: &Constraints, rng: &mut impl Rng) -> Vec<usize> {
    let h_max = constraints.h_max_for(n);
    let mut sizes = vec![constraints.h_min; k];
    for _ in 0..n - k * constraints.h_min {
        let open: Vec<usize> = (0..k).filter(|&a| sizes[a] < h_max).collect();
        sizes[open[rng.random_range(0..open.len())]] += 1;
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let mut labels = vec![0; n];
    let mut it = nodes.into_iter();
    for (a, &h) in sizes.iter().enumerate() {
        for v in it.by_ref().take(h) {
            labels[v] = a;
        }
    }
    labels
}

/// Contiguous balanced groups over nodes sorted by weighted degree.
pub(crate) fn degree_sorted<W: Weights>(g: &W, k: usize) -> Vec<usize> {
    let n = g.n();
    let deg: Vec<f64> = (0..n).map(|v| g.degree(v)).collect();
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.sort_by(|&x, &y| deg[x].total_cmp(&deg[y]).then(x.cmp(&y)));
    contiguous(&nodes, k)
}

/// Balanced contiguous groups along `order`.
pub(crate) fn contiguous(order: &[usize], k: usize) -> Vec<usize> {
    let n = order.len();
    let mut labels = vec![0; n];
    for (pos, &v) in order.iter().enumerate() {
        labels[v] = pos * k / n;
    }
    labels
}

pub(crate) fn canonical(labels: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

pub(crate) struct RestartPlan<'a> {
    pub restarts: usize,
    pub seed: u64,
    pub stream: u64,
    pub degree_init: bool,
    pub warm_starts: &'a [Vec<usize>],
    pub max_sweeps: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub labels: Vec<usize>,
    pub restarts: usize,
    pub counts: MoveCounts,
    pub tied: bool,
}

/// Runs every restart and keeps the best objective, breaking near-ties by the
/// lexicographically smallest canonical labelling.
pub(crate) fn multi_restart<W: Weights>(g: &W, k: usize, constraints: &Constraints, plan: &RestartPlan<'_>) -> SearchOutcome {
    let n = g.n();
    let total = plan.restarts.max(plan.warm_starts.len()).max(1);
    let runs = map_indexed(plan.exec, total, |r| {
        let mut rng = stream_rng(derive_seed(plan.seed, r as u64), plan.stream);
        let init = if r < plan.warm_starts.len() {
            plan.warm_starts[r].clone()
        } else if plan.degree_init && r == plan.warm_starts.len() {
            degree_sorted(g, k)
        } else {
            random_admissible(n, k, constraints, &mut rng)
        };
        let mut st = State::new(g, init, k);
        let counts = local_search(&mut st, constraints, &mut rng, plan.max_sweeps, |_, _| {});
        (st.objective(), canonical(st.labels(), k), counts)
    });
    let eps = tolerance(n);
    let top = runs.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let near: Vec<_> = runs.iter().filter(|r| r.0 >= top - eps).collect();
    let best = near.iter().min_by(|x, y| x.1.cmp(&y.1)).unwrap();
    let tied = near.iter().any(|r| r.1 != best.1);
    let mut counts = MoveCounts::default();
    for r in &runs {
        counts.relabels += r.2.relabels;
        counts.swaps += r.2.swaps;
        counts.sweeps += r.2.sweeps;
    }
    SearchOutcome { labels: best.1.clone(), restarts: total, counts, tied }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::{block_stats, CommunityAssignment};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_graph(n: usize, p: f64, seed: u64) -> AdjacencyMatrix {
        AdjacencyMatrix::sample_with(n, seed, |_, _| p).unwrap()
    }

    fn assert_matches_scratch(st: &State<'_, AdjacencyWeights<'_>>, a: &AdjacencyMatrix, k: usize) {
        let z = CommunityAssignment::new(st.labels().to_vec(), k).unwrap();
        let stats = block_stats(a, &z).unwrap();
        for x in 0..k {
            for y in 0..k {
                assert_eq!(st.sums()[x * k + y], stats.edge_sums[x][y] as f64);
            }
        }
        assert_eq!(st.sizes(), &stats.sizes[..]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn incremental_sums_are_exact(seed in any::<u64>(), n in 8usize..20, k in 2usize..4) {
            let a = random_graph(n, 0.4, seed);
            let g = AdjacencyWeights::new(&a);
            let mut rng = stream_rng(seed, 9);
            let c = Constraints::default();
            let mut st = State::new(&g, random_admissible(n, k, &c, &mut rng), k);
            for _ in 0..40 {
                let v = rng.random_range(0..n);
                let u = rng.random_range(0..n);
                let b = rng.random_range(0..k);
                let before = st.objective();
                if rng.random_bool(0.5) {
                    let a0 = st.labels()[v];
                    if a0 == b || st.sizes()[a0] <= 2 { continue; }
                    let d = st.relabel_delta(v, b);
                    st.apply_relabel(v, b);
                    prop_assert!((st.objective() - before - d).abs() < 1e-8);
                } else {
                    let d = st.swap_delta(v, u);
                    st.apply_swap(v, u);
                    prop_assert!((st.objective() - before - d).abs() < 1e-8);
                }
                let scratch = objective_from_scratch(&g, st.labels(), k);
                prop_assert!((st.objective() - scratch).abs() < 1e-8);
                assert_matches_scratch(&st, &a, k);
            }
        }

        #[test]
        fn accepted_moves_never_decrease_loglik(seed in any::<u64>(), n in 8usize..24, k in 2usize..5) {
            prop_assume!(2 * k <= n);
            let a = random_graph(n, 0.3, seed);
            let g = AdjacencyWeights::new(&a);
            let c = Constraints::default();
            let mut rng = stream_rng(seed, 3);
            let mut st = State::new(&g, random_admissible(n, k, &c, &mut rng), k);
            let mut last = crate::blockmodel::profile_log_likelihood(
                &a, &CommunityAssignment::new(st.labels().to_vec(), k).unwrap()).unwrap();
            let mut ok = true;
            local_search(&mut st, &c, &mut rng, 50, |s, _| {
                let z = CommunityAssignment::new(s.labels().to_vec(), k).unwrap();
                let ll = crate::blockmodel::profile_log_likelihood(&a, &z).unwrap();
                ok &= ll >= last;
                ok &= z.check(&c).is_ok();
                last = ll;
                assert_matches_scratch(s, &a, k);
            });
            prop_assert!(ok);
        }

        #[test]
        fn probability_state_tracks_scratch(seed in any::<u64>(), n in 6usize..14) {
            let p = EdgeProbabilityMatrix::from_fn(n, 1.0, |i, j| 0.05 + 0.9 * (((i * 7 + j * 3 + seed as usize) % 11) as f64 / 11.0)).unwrap();
            let g = ProbabilityWeights::new(&p);
            let c = Constraints::default();
            let mut rng = stream_rng(seed, 4);
            let mut st = State::new(&g, random_admissible(n, 2, &c, &mut rng), 2);
            local_search(&mut st, &c, &mut rng, 20, |s, _| {
                let scratch = objective_from_scratch(&g, s.labels(), 2);
                assert!((s.objective() - scratch).abs() < 1e-9);
            });
        }
    }

    #[test]
    fn random_admissible_respects_bounds() {
        let c = Constraints::new(3, Some(5));
        let mut rng = stream_rng(1, 1);
        for _ in 0..50 {
            let z = random_admissible(17, 4, &c, &mut rng);
            let z = CommunityAssignment::new(z, 4).unwrap();
            assert!(z.check(&c).is_ok());
        }
    }

    #[test]
    fn contiguous_is_balanced() {
        let order: Vec<usize> = (0..10).rev().collect();
        let z = contiguous(&order, 3);
        let mut sizes = [0; 3];
        for &l in &z {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&h| h == 3 || h == 4));
        assert_eq!(z[9], 0);
    }
}
