//! Step graphons (blockmodel approximations), block averaging of a graphon
//! over a partition, and grid diagnostics: approximation error and Hölder
//! certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::graphon::{midpoints, Graphon};
use crate::partition::Partition;

/// Piecewise-constant graphon: `values[a][b]` on `omega_ab`.
///
/// Serializes as `{"h": [...], "values": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepGraphonRepr", into = "StepGraphonRepr")]
pub struct StepGraphon {
    partition: Partition,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct StepGraphonRepr {
    h: Partition,
    values: Vec<Vec<f64>>,
}

impl TryFrom<StepGraphonRepr> for StepGraphon {
    type Error = Error;

    fn try_from(r: StepGraphonRepr) -> Result<Self> {
        StepGraphon::new(r.h, r.values)
    }
}

impl From<StepGraphon> for StepGraphonRepr {
    fn from(s: StepGraphon) -> Self {
        StepGraphonRepr { h: s.partition, values: s.values }
    }
}

impl StepGraphon {
    pub fn new(partition: Partition, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = partition.k();
        if values.len() != k || values.iter().any(|r| r.len() != k) {
            return Err(Error::domain(format!("step graphon over {k} groups needs a {k}x{k} matrix")));
        }
        for a in 0..k {
            for b in a..k {
                let v = values[a][b];
                if v != values[b][a] {
                    return Err(Error::domain(format!("values[{a}][{b}] != values[{b}][{a}]")));
                }
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::domain(format!("values[{a}][{b}] = {v} is not a finite nonnegative number")));
                }
            }
        }
        Ok(StepGraphon { partition, values })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// `values[H^-1(x), H^-1(y)]`.
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.values[self.partition.block_of(x)][self.partition.block_of(y)]
    }

    /// Exact integral over the unit square.
    pub fn integral(&self) -> f64 {
        let n = self.partition.n() as f64;
        let h = self.partition.sizes();
        let mut s = 0.0;
        for a in 0..self.k() {
            for b in 0..self.k() {
                s += self.values[a][b] * (h[a] * h[b]) as f64;
            }
        }
        s / (n * n)
    }

    /// Same function with its blocks laid out in a new order: block `i` of
    /// the result is block `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> StepGraphon {
        let values = order.iter().map(|&a| order.iter().map(|&b| self.values[a][b]).collect()).collect();
        StepGraphon { partition: self.partition.permuted(order), values }
    }

    /// Multiplies all heights by `c >= 0`.
    pub fn scaled(&self, c: f64) -> StepGraphon {
        let values = self.values.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        StepGraphon { partition: self.partition.clone(), values }
    }
}

/// Block averages `fbar_ab = |omega_ab|^-1 \iint_{omega_ab} f`, each computed
/// by the midpoint rule on a `quad_points x quad_points` sub-grid per block.
pub fn block_average_graphon(f: &Graphon, partition: &Partition, quad_points: usize) -> Result<StepGraphon> {
    if quad_points < 2 {
        return Err(Error::domain(format!("quad_points must be >= 2, got {quad_points}")));
    }
    let k = partition.k();
    let nodes: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let (lo, hi) = partition.interval(a);
            midpoints(quad_points).into_iter().map(|t| lo + t * (hi - lo)).collect()
        })
        .collect();
    let mut values = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            // Accumulate deviations from the first sample so a constant
            // block averages to its value exactly.
            let base = f.eval(nodes[a][0], nodes[b][0]);
            let mut dev = 0.0;
            for &x in &nodes[a] {
                for &y in &nodes[b] {
                    dev += f.eval(x, y) - base;
                }
            }
            let v = base + dev / (quad_points * quad_points) as f64;
            values[a][b] = v;
            values[b][a] = v;
        }
    }
    StepGraphon::new(partition.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Sup,
    L2,
}

/// Grid approximation of `||f - fbar||` over the open square.
pub fn stepfunction_error(f: &Graphon, fbar: &StepGraphon, grid: usize, norm: Norm) -> Result<f64> {
    if grid < 8 {
        return Err(Error::domain(format!("grid must be >= 8, got {grid}")));
    }
    let pts = midpoints(grid);
    let blocks: Vec<usize> = pts.iter().map(|&x| fbar.partition.block_of(x)).collect();
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    for (i, &x) in pts.iter().enumerate() {
        for (j, &y) in pts.iter().enumerate() {
            let d = (f.eval(x, y) - fbar.values[blocks[i]][blocks[j]]).abs();
            sup = sup.max(d);
            sq += d * d;
        }
    }
    Ok(match norm {
        Norm::Sup => sup,
        Norm::L2 => (sq / (grid * grid) as f64).sqrt(),
    })
}

/// Grid check of the declared Hölder class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderCertificate {
    pub alpha_ok: bool,
    /// Largest `|f(x,y) - f(x',y')| / |(x,y) - (x',y')|^alpha` over grid pairs.
    pub worst_ratio: f64,
}

/// Checks `|f(p) - f(q)| / |p - q|^alpha <= M` over all pairs of grid
/// midpoints. Heuristic: a pass is evidence, not proof.
pub fn holder_certificate(f: &Graphon, grid: usize, exec: Execution) -> Result<HolderCertificate> {
    if grid < 16 {
        return Err(Error::domain(format!("grid must be >= 16, got {grid}")));
    }
    let holder = f
        .holder()
        .ok_or_else(|| Error::domain(format!("graphon '{}' declares no Hölder class", f.name())))?;
    let pts = midpoints(grid);
    let m = grid * grid;
    let coords: Vec<(f64, f64, f64)> = (0..m)
        .map(|i| {
            let (x, y) = (pts[i / grid], pts[i % grid]);
            (x, y, f.eval(x, y))
        })
        .collect();
    let half_alpha = holder.alpha / 2.0;
    let per_point = exec::map_indexed(exec, m, |i| {
        let (x, y, v) = coords[i];
        let mut worst = 0.0f64;
        for &(x2, y2, v2) in &coords[i + 1..] {
            let d2 = (x - x2).powi(2) + (y - y2).powi(2);
            worst = worst.max((v - v2).abs() / d2.powf(half_alpha));
        }
        worst
    });
    let worst_ratio = per_point.into_iter().fold(0.0, f64::max);
    Ok(HolderCertificate { alpha_ok: worst_ratio <= holder.m * (1.0 + 1e-9), worst_ratio })
}
