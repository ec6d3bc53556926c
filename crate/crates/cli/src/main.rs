//! `graphon`: sample networks from graphons, fit blockmodels, score the fits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphon::blockmodel::{mple_exhaustive, mple_search, oracle_mple, Constraints, FitResult, SearchConfig};
use graphon::harness::{oracle_rank_assignment, run_sweep, write_outputs, ExperimentConfig};
use graphon::risk::{build_estimator, graphon_mse, normalized_kl_risk, oracle_risk, Alignment, RiskReport};
use graphon::sampler::{check_scale, edge_probabilities, sample_adjacency, sample_latents, LatentSample};
use graphon::selftest::{run_selftest, SelftestOptions};
use graphon::{AdjacencyMatrix, Error, Execution, Graphon, Partition};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "graphon", version, about = "Graphon estimation by maximum profile likelihood blockmodels")]
struct Cli {
    /// Progress and diagnostics on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network from a scaled graphon and write it as an edge list.
    Sample(SampleArgs),
    /// Fit a k-group blockmodel by maximum profile likelihood.
    Fit(FitArgs),
    /// Turn a fit into a step-function graphon estimate.
    Estimate(EstimateArgs),
    /// Score a fit against the model that generated the network.
    Risk(RiskArgs),
    /// Run a Monte Carlo sweep from a TOML config.
    Sweep(SweepArgs),
    /// Run reduced-scale invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    graphon: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-list output; the sidecar goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Include the latent positions in the sidecar.
    #[arg(long)]
    emit_latents: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Edge-list input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    h_min: usize,
    #[arg(long)]
    h_max: Option<usize>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate every admissible assignment instead of searching.
    #[arg(long)]
    exhaustive: bool,
    /// Skip the degree-sorted starting assignment.
    #[arg(long)]
    no_degree_init: bool,
    /// Worker threads for restarts; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// FitResult JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// FitResult JSON input.
    #[arg(long)]
    fit: PathBuf,
    /// Estimate JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Also report MSE against this catalogue graphon.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value = "block_permutation_search")]
    alignment: String,
}

#[derive(Args)]
struct RiskArgs {
    /// Sidecar JSON written by `sample`.
    #[arg(long)]
    sample: PathBuf,
    /// FitResult JSON for the sampled network.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value = "block_permutation_search")]
    alignment: String,
    /// Oracle search restarts on top of the latent-rank start.
    #[arg(long, default_value_t = 1)]
    oracle_restarts: usize,
    /// RiskReport JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the report as a one-row CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replicates; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Also write a gnuplot-ready summary.dat.
    #[arg(long)]
    dat: bool,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inflate every KL divergence so the Taylor check must fail.
    #[arg(long)]
    corrupt_kl: bool,
}

/// Sidecar describing how an edge list was generated.
#[derive(Serialize, Deserialize)]
struct SampleMeta {
    graphon: String,
    n: usize,
    rho: f64,
    seed: u64,
    edges: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    xi: Option<Vec<f64>>,
}

enum Failure {
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::Json(e))
    }
}

type CmdResult = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Undefined(_) | Error::InfiniteDivergence { .. } => 3,
        Error::Invariant(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    let res = match cli.cmd {
        Command::Sample(a) => sample(a, verbose),
        Command::Fit(a) => fit(a, verbose),
        Command::Estimate(a) => estimate(a),
        Command::Risk(a) => risk(a, verbose),
        Command::Sweep(a) => sweep(a, verbose),
        Command::Selftest(a) => selftest(a, verbose),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

fn execution(jobs: Option<usize>) -> Result<Execution, Error> {
    match jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(j) => {
            // a second call after the pool exists is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::default()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn read_edges(path: &Path) -> Result<AdjacencyMatrix, Error> {
    AdjacencyMatrix::read_edge_list(BufReader::new(File::open(path)?))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn sample(a: SampleArgs, verbose: bool) -> CmdResult {
    let f = Graphon::by_name(&a.graphon)?;
    if a.n < 2 {
        return Err(Error::Domain(format!("n must be at least 2, got {}", a.n)).into());
    }
    check_scale(&f, a.rho)?;
    let xi = sample_latents(a.n, a.seed)?;
    let p = edge_probabilities(&f, &xi, a.rho)?;
    let adj = sample_adjacency(&p, a.seed);
    let mut w = BufWriter::new(File::create(&a.out)?);
    adj.write_edge_list(&mut w)?;
    w.flush()?;
    let meta = SampleMeta {
        graphon: f.name().to_string(),
        n: a.n,
        rho: a.rho,
        seed: a.seed,
        edges: adj.edge_count(),
        xi: a.emit_latents.then(|| xi.xi.clone()),
    };
    write_json(&sidecar_path(&a.out), &meta)?;
    if verbose {
        eprintln!("sampled n = {}, m = {}, density {:.6}", a.n, adj.edge_count(), adj.edge_density());
    }
    Ok(())
}

fn fit(a: FitArgs, verbose: bool) -> CmdResult {
    let constraints = Constraints::new(a.h_min, a.h_max);
    let exec = execution(a.jobs)?;
    let adj = read_edges(&a.input)?;
    constraints.check_feasible(adj.n(), a.k)?;
    let result = if a.exhaustive {
        mple_exhaustive(&adj, a.k, constraints)?
    } else {
        let cfg = SearchConfig::new(a.restarts, a.seed).with_degree_init(!a.no_degree_init).with_exec(exec);
        mple_search(&adj, a.k, constraints, &cfg)?
    };
    result.verify(&adj)?;
    write_json(&a.out, &result)?;
    println!("loglik {}", result.profile_loglik);
    println!("saturated_fraction {}", result.stats.saturated_fraction());
    if verbose {
        eprintln!(
            "method {}, restarts {}, swaps {}, relabels {}, tied {}",
            result.search.method, result.restarts_used, result.swap_count, result.search.relabel_count, result.search.tied
        );
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> CmdResult {
    let alignment: Alignment = a.alignment.parse()?;
    let fit: FitResult = read_json(&a.fit)?;
    let est = build_estimator(&fit)?;
    write_json(&a.out, &est)?;
    println!("rho_hat {}", est.rho_hat);
    if let Some(name) = a.truth {
        let f = Graphon::by_name(&name)?;
        println!("mse_identity {}", graphon_mse(&f, &est, a.grid, Alignment::Identity)?);
        println!("mse_aligned {}", graphon_mse(&f, &est, a.grid, alignment)?);
    }
    Ok(())
}

fn risk(a: RiskArgs, verbose: bool) -> CmdResult {
    let alignment: Alignment = a.alignment.parse()?;
    let meta: SampleMeta = read_json(&a.sample)?;
    let fit: FitResult = read_json(&a.fit)?;
    let f = Graphon::by_name(&meta.graphon)?;
    let xi = sample_latents(meta.n, meta.seed)?;
    if let Some(stored) = &meta.xi {
        if stored != &xi.xi {
            return Err(Failure::Check("sidecar latents do not match its seed".into()));
        }
    }
    let p = edge_probabilities(&f, &xi, meta.rho)?;
    let adj = sample_adjacency(&p, meta.seed);
    if adj.edge_count() != meta.edges {
        return Err(Failure::Check("regenerated network does not match the sidecar".into()));
    }
    fit.verify(&adj)?;
    let k = fit.assignment.k();
    let constraints = Constraints::default();
    let rank_z = oracle_rank_assignment(&LatentSample { xi: xi.xi.clone(), seed: meta.seed }, &Partition::balanced(meta.n, k)?)?;
    let oracle_cfg = SearchConfig::new(a.oracle_restarts.max(1), meta.seed).with_warm_starts(vec![rank_z.clone()]);
    let oracle = oracle_mple(&p, k, constraints, &oracle_cfg)?;
    let fitted_risk = normalized_kl_risk(&p, &fit)?;
    let orisk = oracle.divergence / p.total();
    let est = build_estimator(&fit)?;
    let report = RiskReport {
        n: meta.n,
        k,
        rho_n: meta.rho,
        seed: meta.seed,
        fitted_risk,
        oracle_risk: orisk,
        excess_risk: fitted_risk - orisk,
        mse_identity: graphon_mse(&f, &est, a.grid, Alignment::Identity)?,
        mse_aligned: graphon_mse(&f, &est, a.grid, alignment)?,
        saturated_fraction: fit.stats.saturated_fraction(),
        loglik: fit.profile_loglik,
        runtime_ms: 0,
        negative_excess: fitted_risk < orisk,
    };
    write_json(&a.out, &report)?;
    if let Some(path) = &a.csv {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    println!("fitted_risk {}", report.fitted_risk);
    println!("oracle_risk {}", report.oracle_risk);
    println!("excess_risk {}", report.excess_risk);
    println!("mse_aligned {}", report.mse_aligned);
    if verbose {
        eprintln!("rank-assignment oracle risk {}", oracle_risk(&p, &rank_z)?);
    }
    Ok(())
}

fn sweep(a: SweepArgs, verbose: bool) -> CmdResult {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.exec = execution(a.jobs)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    let notes = cfg.validate()?;
    if verbose {
        eprintln!("regime: {}", cfg.regime()?);
        for n in &notes {
            eprintln!("note: {n}");
        }
    }
    let result = run_sweep(&cfg)?;
    let paths = write_outputs(&a.out, &result, a.dat)?;
    for row in result.failures() {
        eprintln!("n = {} replicate {}: {}", row.n, row.replicate, row.status);
    }
    for s in &result.summary.per_n {
        let med = |m: &str| s.metrics[m].median.map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}"));
        println!(
            "n {} k {} ok {} failed {} excess_risk {} mse_aligned {}",
            s.n,
            s.k,
            s.ok,
            s.failed,
            med("excess_risk"),
            med("mse_aligned")
        );
    }
    if verbose {
        for p in paths {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn selftest(a: SelftestArgs, verbose: bool) -> CmdResult {
    let report = run_selftest(SelftestOptions { seed: a.seed, corrupt_kl: a.corrupt_kl })?;
    for c in &report.checks {
        if verbose || !c.passed {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if report.passed() {
        println!("selftest passed ({} checks)", report.checks.len());
        Ok(())
    } else {
        let names: Vec<_> = report.failed().map(|c| c.name.as_str()).collect();
        Err(Failure::Check(format!("failed checks: {}", names.join(", "))))
    }
}
