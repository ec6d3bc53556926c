use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Group-size constraints defining the admissible set of assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub h_min: usize,
    /// `None` means no upper cap (effectively `n`).
    pub h_max: Option<usize>,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints { h_min: 2, h_max: None }
    }
}

impl Constraints {
    pub fn new(h_min: usize, h_max: Option<usize>) -> Self {
        Constraints { h_min, h_max }
    }

    /// Exactly the sizes in `h`, in some order.
    pub fn fixed(h: usize) -> Self {
        Constraints { h_min: h, h_max: Some(h) }
    }

    pub fn h_max_for(&self, n: usize) -> usize {
        self.h_max.unwrap_or(n).min(n)
    }

    /// Checks `h_min >= 2`, `h_min <= h_max` and `k h_min <= n <= k h_max`.
    pub fn check_feasible(&self, n: usize, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.h_min < 2 {
            return Err(Error::config(format!("h_min must be >= 2, got {}", self.h_min)));
        }
        let h_max = self.h_max_for(n);
        if self.h_min > h_max {
            return Err(Error::config(format!("h_min {} exceeds h_max {h_max}", self.h_min)));
        }
        if k * self.h_min > n {
            return Err(Error::config(format!("k * h_min = {k} * {} = {} exceeds n = {n}", self.h_min, k * self.h_min)));
        }
        if k * h_max < n {
            return Err(Error::config(format!("k * h_max = {k} * {h_max} = {} is below n = {n}", k * h_max)));
        }
        Ok(())
    }

    pub fn admits(&self, sizes: &[usize], n: usize) -> bool {
        let h_max = self.h_max_for(n);
        sizes.iter().all(|&h| h >= self.h_min && h <= h_max)
    }
}

/// Labels `z_i` in `0..k` for `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AssignmentRepr")]
pub struct CommunityAssignment {
    k: usize,
    labels: Vec<usize>,
}

#[derive(Deserialize)]
struct AssignmentRepr {
    k: usize,
    labels: Vec<usize>,
}

impl TryFrom<AssignmentRepr> for CommunityAssignment {
    type Error = Error;

    fn try_from(r: AssignmentRepr) -> Result<Self> {
        CommunityAssignment::new(r.labels, r.k)
    }
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!("label {l} out of range for k = {k}")));
        }
        Ok(CommunityAssignment { k, labels })
    }

    /// `z_i = H^-1(perm[i] / n)` with 1-based ranks `perm`.
    pub fn from_decomposition(partition: &Partition, perm: &[usize]) -> Result<Self> {
        let n = partition.n();
        if perm.len() != n {
            return Err(Error::domain(format!("permutation has length {} but n = {n}", perm.len())));
        }
        let mut seen = vec![false; n];
        for &r in perm {
            if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
                return Err(Error::domain("ranks must be a permutation of 1..=n"));
            }
        }
        Ok(CommunityAssignment { k: partition.k(), labels: perm.iter().map(|&r| partition.block_of_rank(r)).collect() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Group sizes as a [`Partition`]; fails if any group has fewer than 2 nodes.
    pub fn partition(&self) -> Result<Partition> {
        Partition::new(self.sizes())
    }

    /// Splits `z` into a partition and a node permutation `Pi` (1-based
    /// ranks) with `z_i = H^-1(Pi(i) / n)`: nodes are ordered by label, ties
    /// by index.
    pub fn decompose(&self) -> Result<(Partition, Vec<usize>)> {
        let partition = self.partition()?;
        let mut next: Vec<usize> = (0..self.k).map(|a| partition.cumulative(a) + 1).collect();
        let perm = self
            .labels
            .iter()
            .map(|&l| {
                let r = next[l];
                next[l] += 1;
                r
            })
            .collect();
        Ok((partition, perm))
    }

    /// Relabels by first occurrence so labels appear as 0, 1, 2, ... in node order.
    pub fn canonical(&self) -> CommunityAssignment {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        CommunityAssignment { k: self.k, labels }
    }

    /// Applies a label permutation: node with label `l` gets `map[l]`.
    pub fn relabeled(&self, map: &[usize]) -> Result<CommunityAssignment> {
        CommunityAssignment::new(self.labels.iter().map(|&l| map[l]).collect(), self.k)
    }

    pub fn check(&self, constraints: &Constraints) -> Result<()> {
        let sizes = self.sizes();
        if !constraints.admits(&sizes, self.n()) {
            return Err(Error::constraint(format!("group sizes {sizes:?} violate {constraints:?}")));
        }
        Ok(())
    }

    /// Members of each group, in node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }
}
