//! Reduced-scale invariant checks run by `graphon selftest`.

use rand::Rng;
use serde::Serialize;

use crate::blockmodel::{bernoulli_kl, pairwise_log_likelihood, profile_log_likelihood, random_assignment, Constraints};
use crate::error::Result;
use crate::graphon::Graphon;
use crate::partition::Partition;
use crate::risk::kl_taylor_check_with;
use crate::rng::{derive_seed, stream, stream_rng};
use crate::sampler::{edge_probabilities, sample_adjacency, sample_latents, AdjacencyMatrix};

/// `p` values `0.05, 0.10, ..., 0.95`.
pub fn taylor_p_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Relative offsets `delta / min(p, 1 - p)`.
pub const TAYLOR_DELTA_FRACTIONS: [f64; 6] = [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9];

#[derive(Debug, Clone, Serialize)]
pub struct TaylorGridResult {
    pub checked: usize,
    /// `(p, delta)` points where a bound failed.
    pub failures: Vec<(f64, f64)>,
    pub min_slack: f64,
}

/// Both Taylor bounds over the full `(p, delta)` grid using divergence `kl`.
pub fn kl_taylor_grid(kl: impl Fn(f64, f64) -> Result<f64> + Copy) -> Result<TaylorGridResult> {
    let mut out = TaylorGridResult { checked: 0, failures: Vec::new(), min_slack: f64::INFINITY };
    for p in taylor_p_grid() {
        for frac in TAYLOR_DELTA_FRACTIONS {
            let delta = frac * p.min(1.0 - p);
            let c = kl_taylor_check_with(p, delta, kl)?;
            out.checked += 1;
            out.min_slack = out.min_slack.min(c.slack);
            if !c.ok {
                out.failures.push((p, delta));
            }
        }
    }
    Ok(out)
}

/// Lattice points `i / (n + 1)` outside the interval of block `H^-1(i / n)`.
pub fn containment_violations(p: &Partition) -> usize {
    let n = p.n();
    (1..=n)
        .filter(|&i| {
            let a = p.quantile(i as f64 / n as f64).expect("i / n in (0, 1]") - 1;
            let (lo, hi) = p.interval(a);
            let x = i as f64 / (n + 1) as f64;
            !(lo <= x && x < hi)
        })
        .count()
}

/// Random partition of `n` with every block of size at least 2.
pub fn random_partition(n: usize, rng: &mut impl Rng) -> Partition {
    let k = rng.random_range(1..=n / 2);
    let mut sizes = vec![2; k];
    for _ in 0..n - 2 * k {
        sizes[rng.random_range(0..k)] += 1;
    }
    Partition::new(sizes).expect("sizes >= 2")
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    pub var: f64,
    pub replicates: usize,
}

/// Sample mean and variance of `rho_hat` over independent replicates.
pub fn rho_hat_moments(f: &Graphon, rho: f64, n: usize, replicates: usize, seed: u64) -> Result<Moments> {
    let mut vals = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let s = derive_seed(seed, r as u64);
        let xi = sample_latents(n, s)?;
        let p = edge_probabilities(f, &xi, rho)?;
        vals.push(sample_adjacency(&p, s).edge_density());
    }
    let m = replicates as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(Moments { mean, sd: var.sqrt(), var, replicates })
}

/// Largest gap between the per-pair and block forms of the profile
/// likelihood over random instances with `n <= 30`, `k <= 4`.
pub fn likelihood_identity_gap(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, stream::CHECKS);
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = rng.random_range(4..=30);
        let k = rng.random_range(1..=4.min(n / 2));
        let density = rng.random_range(0.0..=1.0);
        let a = AdjacencyMatrix::sample_with(n, derive_seed(seed, t as u64), |_, _| density)?;
        let z = random_assignment(n, k, Constraints::default(), derive_seed(seed ^ 0x5eed, t as u64))?;
        let gap = (profile_log_likelihood(&a, &z)? - pairwise_log_likelihood(&a, &z)?).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Scale every divergence by 1.5 to exercise the failure path.
    pub corrupt_kl: bool,
}

pub fn run_selftest(opts: SelftestOptions) -> Result<SelftestReport> {
    let mut checks = Vec::new();

    let grid = if opts.corrupt_kl {
        kl_taylor_grid(|p, q| Ok(1.5 * bernoulli_kl(p, q)?))?
    } else {
        kl_taylor_grid(bernoulli_kl)?
    };
    checks.push(CheckResult {
        name: "kl-taylor-bounds".into(),
        passed: grid.failures.is_empty(),
        detail: format!("{} grid points, {} failures, min slack {:.3e}", grid.checked, grid.failures.len(), grid.min_slack),
    });

    let mut rng = stream_rng(opts.seed, stream::CHECKS);
    let (mut tried, mut bad) = (0, 0);
    for n in 4..=40 {
        for _ in 0..20 {
            bad += containment_violations(&random_partition(n, &mut rng));
            tried += 1;
        }
    }
    checks.push(CheckResult {
        name: "partition-containment".into(),
        passed: bad == 0,
        detail: format!("{tried} partitions with n <= 40, {bad} violations"),
    });

    let f = Graphon::cosine();
    let m100 = rho_hat_moments(&f, 0.2, 100, 200, opts.seed)?;
    let m200 = rho_hat_moments(&f, 0.2, 200, 200, opts.seed ^ 1)?;
    let mean_ok = (m100.mean - 0.2).abs() <= 4.0 * m100.sd / (m100.replicates as f64).sqrt();
    checks.push(CheckResult {
        name: "rho-hat-moments".into(),
        passed: mean_ok && m200.var < m100.var,
        detail: format!("mean {:.5} (target 0.2), var n=100 {:.3e}, var n=200 {:.3e}", m100.mean, m100.var, m200.var),
    });

    let gap = likelihood_identity_gap(60, opts.seed)?;
    checks.push(CheckResult {
        name: "likelihood-identity".into(),
        passed: gap <= 1e-10,
        detail: format!("max |pairwise - block| = {gap:.3e} over 60 instances"),
    });

    Ok(SelftestReport { checks })
}
