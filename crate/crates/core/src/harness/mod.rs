//! Config-driven Monte Carlo sweeps over `(n, k, rho_n)`.
//!
//! Replicate `r` uses seed `derive_seed(cfg.seed, r)` at every `n`, so rows
//! with the same seed are paired across sample sizes.

mod rules;
mod summary;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use rules::{check_growth, classify_rho, Monomial, Regime, Rounding, Rule};
pub use summary::{quantile, slope_estimate, write_outputs, MetricSummary, NSummary, Summary, METRICS};

use crate::blockmodel::{mple_search, oracle_mple, CommunityAssignment, Constraints, SearchConfig};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::graphon::Graphon;
use crate::partition::Partition;
use crate::risk::{build_estimator, graphon_mse, normalized_kl_risk, oracle_risk, Alignment, RiskReport};
use crate::rng::derive_seed;
use crate::sampler::{check_scale, edge_probabilities, sample_adjacency, sample_latents, LatentSample};

pub const SCHEMA_VERSION: u32 = 1;

fn default_h_min() -> Rule {
    "2".parse().expect("constant rule")
}

fn default_restarts() -> usize {
    3
}

fn default_grid() -> usize {
    256
}

fn default_true() -> bool {
    true
}

fn default_oracle_restarts() -> usize {
    1
}

fn default_max_sweeps() -> u64 {
    200
}

/// Sweep configuration, stored as TOML.
///
/// ```toml
/// schema_version = 1
/// graphon = "cosine"
/// n_list = [100, 200, 400]
/// k_rule = "ceil(sqrt(n))"
/// rho_rule = "0.3"
/// replicates = 20
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub graphon: String,
    pub n_list: Vec<usize>,
    pub k_rule: Rule,
    pub rho_rule: Rule,
    pub replicates: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_h_min")]
    pub h_min: Rule,
    #[serde(default)]
    pub h_max: Option<Rule>,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub alignment: Alignment,
    /// Add a degree-sorted start to the fitted search.
    #[serde(default = "default_true")]
    pub degree_init: bool,
    /// Oracle search restarts on top of the latent-rank warm start.
    #[serde(default = "default_oracle_restarts")]
    pub oracle_restarts: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: u64,
    /// Fill `runtime_ms`; off by default so output is reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    /// How to run, not what to run: accepted on input, never written out.
    #[serde(default, skip_serializing)]
    pub exec: Execution,
}

impl ExperimentConfig {
    /// A dense-regime configuration with defaults for everything optional.
    pub fn dense(graphon: &str, n_list: Vec<usize>, rho: f64, k_rule: &str, replicates: usize, seed: u64) -> Result<Self> {
        Ok(ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            graphon: graphon.to_string(),
            n_list,
            k_rule: k_rule.parse()?,
            rho_rule: rho.to_string().parse()?,
            replicates,
            restarts: default_restarts(),
            h_min: default_h_min(),
            h_max: None,
            seed,
            grid: default_grid(),
            alignment: Alignment::default(),
            degree_init: true,
            oracle_restarts: default_oracle_restarts(),
            max_sweeps: default_max_sweeps(),
            record_timing: false,
            exec: Execution::default(),
        })
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Static checks: schema, catalogue, ranges and regime growth
    /// conditions. Returns advisory notes.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Graphon::by_name(&self.graphon)?;
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 4) {
            return Err(Error::config("n_list must be nonempty with every n >= 4"));
        }
        if self.replicates == 0 || self.restarts == 0 {
            return Err(Error::config("replicates and restarts must be at least 1"));
        }
        if self.grid < 64 {
            return Err(Error::config("grid must be at least 64"));
        }
        check_growth(&self.k_rule, &self.rho_rule)
    }

    pub fn regime(&self) -> Result<Regime> {
        classify_rho(&self.rho_rule)
    }

    /// `(k, rho_n, constraints)` at `n`, unchecked against the model.
    pub fn instantiate(&self, n: usize) -> Result<(usize, f64, Constraints)> {
        let k = self.k_rule.eval_int(n)?;
        let rho = self.rho_rule.eval(n);
        let h_min = self.h_min.eval_int(n)?;
        let h_max = self.h_max.as_ref().map(|r| r.eval(n).floor() as usize);
        Ok((k, rho, Constraints::new(h_min, h_max)))
    }
}

/// One `(n, replicate)` cell. `report` is `None` for failure rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub replicate: usize,
    pub k: usize,
    pub rho_n: f64,
    pub seed: u64,
    pub report: Option<RiskReport>,
    /// Oracle risk at the latent-rank assignment, no search.
    pub rank_oracle_risk: Option<f64>,
    /// Known once a fit exists, so also on some failure rows.
    pub saturated_fraction: Option<f64>,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.report.is_some()
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        let r = self.report.as_ref()?;
        Some(match name {
            "fitted_risk" => r.fitted_risk,
            "oracle_risk" => r.oracle_risk,
            "excess_risk" => r.excess_risk,
            "mse_identity" => r.mse_identity,
            "mse_aligned" => r.mse_aligned,
            "saturated_fraction" => return self.saturated_fraction,
            "loglik" => r.loglik,
            "rank_oracle_risk" => return self.rank_oracle_risk,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub notes: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub summary: Summary,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.is_ok())
    }
}

/// `z_i = H^-1(rank(xi_i) / n)`: groups follow the latent order.
pub fn oracle_rank_assignment(xi: &LatentSample, p: &Partition) -> Result<CommunityAssignment> {
    if xi.n() != p.n() {
        return Err(Error::domain(format!("{} latents but the partition has n = {}", xi.n(), p.n())));
    }
    CommunityAssignment::from_decomposition(p, &xi.ranks())
}

/// Runs every `(n, replicate)` cell and aggregates per `n`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let notes = cfg.validate()?;
    let regime = cfg.regime()?;
    let f = Graphon::by_name(&cfg.graphon)?;
    let cells: Vec<(usize, usize)> =
        cfg.n_list.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let rows = map_indexed(cfg.exec, cells.len(), |i| {
        let (n, r) = cells[i];
        run_cell(cfg, &f, n, r)
    });
    let summary = Summary::from_rows(&cfg.n_list, &rows);
    Ok(SweepResult { config: cfg.clone(), regime, notes, rows, summary })
}

fn run_cell(cfg: &ExperimentConfig, f: &Graphon, n: usize, replicate: usize) -> SweepRow {
    let seed = derive_seed(cfg.seed, replicate as u64);
    let (k, rho_n) = match cfg.instantiate(n) {
        Ok((k, rho, _)) => (k, rho),
        Err(_) => (0, f64::NAN),
    };
    let mut row = SweepRow { n, replicate, k, rho_n, seed, report: None, rank_oracle_risk: None, saturated_fraction: None, status: "ok".into() };
    match replicate_report(cfg, f, n, seed, &mut row) {
        Ok(report) => row.report = Some(report),
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

fn replicate_report(cfg: &ExperimentConfig, f: &Graphon, n: usize, seed: u64, row: &mut SweepRow) -> Result<RiskReport> {
    let start = Instant::now();
    let (k, rho_n, constraints) = cfg.instantiate(n)?;
    check_scale(f, rho_n)?;
    constraints.check_feasible(n, k)?;
    let xi = sample_latents(n, seed)?;
    let p = edge_probabilities(f, &xi, rho_n)?;
    let a = sample_adjacency(&p, seed);

    let search = SearchConfig {
        restarts: cfg.restarts,
        seed,
        degree_init: cfg.degree_init,
        max_sweeps: cfg.max_sweeps,
        exec: Execution::Sequential,
        warm_starts: Vec::new(),
    };
    let fit = mple_search(&a, k, constraints, &search)?;
    let saturated_fraction = fit.stats.saturated_fraction();
    row.saturated_fraction = Some(saturated_fraction);

    let rank_z = oracle_rank_assignment(&xi, &Partition::balanced(n, k)?)?;
    let rank_risk = oracle_risk(&p, &rank_z)?;
    row.rank_oracle_risk = Some(rank_risk);
    let oracle_cfg = SearchConfig {
        restarts: cfg.oracle_restarts.max(1),
        degree_init: false,
        warm_starts: if rank_z.check(&constraints).is_ok() { vec![rank_z] } else { Vec::new() },
        ..search
    };
    let oracle = oracle_mple(&p, k, constraints, &oracle_cfg)?;
    let oracle_risk = oracle.divergence / p.total();

    let fitted_risk = normalized_kl_risk(&p, &fit)?;
    let est = build_estimator(&fit)?;
    let mse_identity = graphon_mse(f, &est, cfg.grid, Alignment::Identity)?;
    let mse_aligned = graphon_mse(f, &est, cfg.grid, cfg.alignment)?;
    let excess_risk = fitted_risk - oracle_risk;
    Ok(RiskReport {
        n,
        k,
        rho_n,
        seed,
        fitted_risk,
        oracle_risk,
        excess_risk,
        mse_identity,
        mse_aligned,
        saturated_fraction,
        loglik: fit.profile_loglik,
        runtime_ms: if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 },
        negative_excess: excess_risk < 0.0,
    })
}

#[cfg(test)]
mod tests;
