//! Integer partitions of `n` nodes into `k` groups, with the cumulative map
//! `H` and its generalized inverse.
//!
//! Group numbers in [`Partition::cdf`] and [`Partition::quantile`] are
//! 1-based, matching `H(0) = 0, H(k) = 1`. Everything that indexes arrays
//! ([`Partition::block_of`], community labels) is 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    sizes: Vec<usize>,
    /// `cum[a] = h_1 + ... + h_a`, `cum[0] = 0`.
    cum: Vec<usize>,
}

impl Partition {
    /// Builds a partition from group sizes. Every size must be at least 2.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::domain("partition needs at least one group"));
        }
        if let Some((a, &h)) = sizes.iter().enumerate().find(|(_, &h)| h < 2) {
            return Err(Error::constraint(format!("group {} has size {h} < 2", a + 1)));
        }
        let mut cum = Vec::with_capacity(sizes.len() + 1);
        cum.push(0);
        for &h in &sizes {
            cum.push(cum.last().unwrap() + h);
        }
        Ok(Partition { sizes, cum })
    }

    /// `k` groups of sizes as equal as possible (larger groups first).
    pub fn balanced(n: usize, k: usize) -> Result<Self> {
        if k == 0 || n < 2 * k {
            return Err(Error::constraint(format!("cannot split {n} nodes into {k} groups of size >= 2")));
        }
        let (q, r) = (n / k, n % k);
        Partition::new((0..k).map(|a| q + usize::from(a < r)).collect())
    }

    pub fn n(&self) -> usize {
        *self.cum.last().unwrap()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn max_size(&self) -> usize {
        *self.sizes.iter().max().unwrap()
    }

    pub fn min_size(&self) -> usize {
        *self.sizes.iter().min().unwrap()
    }

    /// Average group size `n / k`.
    pub fn mean_size(&self) -> f64 {
        self.n() as f64 / self.k() as f64
    }

    /// Cumulative node count through 1-based group `a`.
    pub fn cumulative(&self, a: usize) -> usize {
        self.cum[a]
    }

    /// `H(u) = n^-1 sum_{a <= floor(u)} h_a` for `u` in `[0, k]`.
    pub fn cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=self.k() as f64).contains(&u) {
            return Err(Error::domain(format!("H(u) needs u in [0, {}], got {u}", self.k())));
        }
        Ok(self.cum[u.floor() as usize] as f64 / self.n() as f64)
    }

    /// `H^-1(x)`: smallest 1-based group `a` with `H(a) >= x`, for `x` in `(0, 1]`.
    pub fn quantile(&self, x: f64) -> Result<usize> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::domain(format!("H^-1(x) needs x in (0, 1], got {x}")));
        }
        Ok(self.block_of(x) + 1)
    }

    /// 0-based block containing `x`. Values outside `(0, 1]` clamp to the
    /// first or last block.
    pub fn block_of(&self, x: f64) -> usize {
        let n = self.n() as f64;
        // first a with cum[a] / n >= x, among a = 1..=k
        let idx = self.cum[1..].partition_point(|&c| (c as f64 / n) < x);
        idx.min(self.k() - 1)
    }

    /// 0-based block of the node at 1-based rank `r`, i.e. `H^-1(r / n) - 1`
    /// computed in integers.
    pub fn block_of_rank(&self, r: usize) -> usize {
        debug_assert!(r >= 1 && r <= self.n());
        self.cum[1..].partition_point(|&c| c < r)
    }

    /// Interval `[H(a-1), H(a))` of 0-based block `a`.
    pub fn interval(&self, a: usize) -> (f64, f64) {
        let n = self.n() as f64;
        (self.cum[a] as f64 / n, self.cum[a + 1] as f64 / n)
    }

    /// Reorders the groups: group `i` of the result is group `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Partition {
        Partition::new(order.iter().map(|&a| self.sizes[a]).collect()).expect("permutation of a valid partition")
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Partition::new(sizes)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.sizes
    }
}
