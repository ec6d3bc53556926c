//! Sampling from the scaled graphon model: latent uniforms, edge
//! probabilities `p_ij = rho_n f(xi_i, xi_j)`, and Bernoulli adjacency
//! matrices stored as upper-triangle bitsets.

use std::io::{BufRead, Write};

use bitvec::prelude::*;
use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::Graphon;
use crate::rng::{stream, stream_rng};

/// Position of pair `i < j` in a packed upper triangle of an `n x n` matrix.
#[inline]
pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[inline]
pub(crate) fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Latent positions `xi_1..xi_n`, iid uniform on the open interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub xi: Vec<f64>,
    pub seed: u64,
}

impl LatentSample {
    /// Wraps given latent values (each strictly inside `(0,1)`).
    pub fn from_values(xi: Vec<f64>, seed: u64) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::domain("need at least 2 latent values"));
        }
        if let Some(v) = xi.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::domain(format!("latent value {v} is outside (0,1)")));
        }
        Ok(LatentSample { xi, seed })
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    /// 1-based ranks, smallest value first. Ties (probability zero) break by index.
    pub fn ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.xi[a].total_cmp(&self.xi[b]).then(a.cmp(&b)));
        let mut ranks = vec![0; self.n()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r + 1;
        }
        ranks
    }

    /// Order statistics `xi_(1) <= ... <= xi_(n)`.
    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.xi.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Draws `n` iid uniforms on `(0,1)`, reproducibly from `seed`.
pub fn sample_latents(n: usize, seed: u64) -> Result<LatentSample> {
    if n < 2 {
        return Err(Error::domain(format!("n must be >= 2, got {n}")));
    }
    let mut rng = stream_rng(seed, stream::LATENTS);
    let xi = (0..n).map(|_| Open01.sample(&mut rng)).collect();
    Ok(LatentSample { xi, seed })
}

/// Symmetric edge probabilities with zero diagonal; off-diagonal entries in `(0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilityMatrix {
    n: usize,
    rho_n: f64,
    upper: Vec<f64>,
}

impl EdgeProbabilityMatrix {
    /// Builds from a function of `i < j`. Every value must lie in `(0,1)`.
    pub fn from_fn(n: usize, rho_n: f64, mut p: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("n must be >= 2, got {n}")));
        }
        let mut upper = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in i + 1..n {
                let v = p(i, j);
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::ModelViolation(format!("p[{i}][{j}] = {v} is outside (0,1)")));
                }
                upper.push(v);
            }
        }
        Ok(EdgeProbabilityMatrix { n, rho_n, upper })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho_n(&self) -> f64 {
        self.rho_n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[pair_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[pair_index(self.n, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Upper-triangle values in row-major `i < j` order.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `sum_{i<j} p_ij`.
    pub fn total(&self) -> f64 {
        self.upper.iter().sum()
    }

    /// Writes the full matrix as CSV, one row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.get(i, j))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `p_ij = rho_n f(xi_i, xi_j)`. Requires `rho_n > 0` and `rho_n sup f < 1`.
pub fn edge_probabilities(f: &Graphon, xi: &LatentSample, rho_n: f64) -> Result<EdgeProbabilityMatrix> {
    check_scale(f, rho_n)?;
    EdgeProbabilityMatrix::from_fn(xi.n(), rho_n, |i, j| rho_n * f.eval(xi.xi[i], xi.xi[j]))
}

/// Checks `rho_n > 0` and `rho_n sup f < 1`.
pub fn check_scale(f: &Graphon, rho_n: f64) -> Result<()> {
    if !(rho_n > 0.0) || !rho_n.is_finite() {
        return Err(Error::ModelViolation(format!("rho_n must be positive, got {rho_n}")));
    }
    let top = rho_n * f.upper_bound();
    if !(top < 1.0) {
        return Err(Error::ModelViolation(format!(
            "rho_n * sup f = {rho_n} * {} = {top} is not below 1",
            f.upper_bound()
        )));
    }
    Ok(())
}

/// Simple undirected graph: symmetric binary relation with zero diagonal.
///
/// Edges live in an upper-triangle bitset; neighbour lists are kept
/// alongside for degree-proportional scans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: BitVec<u64, Lsb0>,
    edge_count: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl AdjacencyMatrix {
    /// Builds from an edge list. Rejects self-loops, out-of-range endpoints
    /// and duplicates (in either orientation).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("n must be >= 2, got {n}")));
        }
        let mut bits = bitvec![u64, Lsb0; 0; pair_count(n)];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::domain(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::domain(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            let idx = pair_index(n, a.min(b), a.max(b));
            if bits[idx] {
                return Err(Error::domain(format!("duplicate edge ({a}, {b})")));
            }
            bits.set(idx, true);
        }
        Ok(Self::from_bits(n, bits))
    }

    fn from_bits(n: usize, bits: BitVec<u64, Lsb0>) -> Self {
        let mut degree = vec![0usize; n];
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                if bits[idx] {
                    degree[i] += 1;
                    degree[j] += 1;
                }
                idx += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                if bits[idx] {
                    neighbors[fill[i]] = j as u32;
                    fill[i] += 1;
                    neighbors[fill[j]] = i as u32;
                    fill[j] += 1;
                }
                idx += 1;
            }
        }
        AdjacencyMatrix { n, bits, edge_count: offsets[n] / 2, offsets, neighbors }
    }

    /// Independent `Bernoulli(p(i, j))` draws for `i < j`, mirrored.
    /// Probabilities may be anywhere in `[0, 1]`.
    pub fn sample_with(n: usize, seed: u64, mut p: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("n must be >= 2, got {n}")));
        }
        let mut rng = stream_rng(seed, stream::EDGES);
        let mut bits = bitvec![u64, Lsb0; 0; pair_count(n)];
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                let pij = p(i, j);
                if !(0.0..=1.0).contains(&pij) {
                    return Err(Error::domain(format!("probability {pij} for ({i}, {j}) outside [0,1]")));
                }
                if rng.random::<f64>() < pij {
                    bits.set(idx, true);
                }
                idx += 1;
            }
        }
        Ok(Self::from_bits(n, bits))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.bits[pair_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.bits[pair_index(self.n, j, i)],
            std::cmp::Ordering::Equal => false,
        }
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[self.offsets[v]..self.offsets[v + 1]].iter().map(|&u| u as usize)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// `rho_hat = C(n,2)^-1 sum_{i<j} A_ij`.
    pub fn edge_density(&self) -> f64 {
        self.edge_count as f64 / pair_count(self.n) as f64
    }

    /// Writes the edge-list format: a header `"<n> <m>"` then one `"i j"` per
    /// line, 0-based with `i < j`, in row-major order.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edge_count)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    /// Parses the edge-list format. The header is either `"<n> <m>"` (edge
    /// count checked) or `"n <count>"`. Blank lines and `#` comments are skipped.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut expected_m: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(format!("expected two fields, got '{line}'")));
            }
            if n.is_none() {
                if toks[0] == "n" {
                    n = Some(toks[1].parse().map_err(|e| parse_err(format!("bad node count: {e}")))?);
                } else {
                    n = Some(toks[0].parse().map_err(|e| parse_err(format!("bad node count: {e}")))?);
                    expected_m = Some(toks[1].parse().map_err(|e| parse_err(format!("bad edge count: {e}")))?);
                }
                continue;
            }
            let i: usize = toks[0].parse().map_err(|e| parse_err(format!("bad endpoint: {e}")))?;
            let j: usize = toks[1].parse().map_err(|e| parse_err(format!("bad endpoint: {e}")))?;
            if i >= j {
                return Err(parse_err(format!("edge '{i} {j}' must satisfy i < j")));
            }
            edges.push((i, j));
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        if let Some(m) = expected_m {
            if m != edges.len() {
                return Err(Error::Parse { line: 1, msg: format!("header declares {m} edges, found {}", edges.len()) });
            }
        }
        Self::from_edges(n, &edges)
    }
}

/// Bernoulli draws from `p`, reproducible from `seed`.
pub fn sample_adjacency(p: &EdgeProbabilityMatrix, seed: u64) -> AdjacencyMatrix {
    AdjacencyMatrix::sample_with(p.n, seed, |i, j| p.get(i, j)).expect("validated probabilities")
}

/// `rho_hat`; see [`AdjacencyMatrix::edge_density`].
pub fn edge_density(a: &AdjacencyMatrix) -> f64 {
    a.edge_density()
}
