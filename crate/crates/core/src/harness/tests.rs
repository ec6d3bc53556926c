use super::*;

fn small(graphon: &str, n_list: Vec<usize>, rho: f64, replicates: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::dense(graphon, n_list, rho, "ceil(sqrt(n))", replicates, 7).unwrap();
    cfg.grid = 64;
    cfg.restarts = 2;
    cfg
}

#[test]
fn smoke_constant_graphon() {
    let res = run_sweep(&small("constant", vec![50], 0.3, 2)).unwrap();
    assert_eq!(res.rows.len(), 2);
    for r in &res.rows {
        let rep = r.report.as_ref().expect(&r.status);
        assert!(rep.fitted_risk >= 0.0);
        assert!(rep.mse_identity.is_finite() && rep.mse_aligned.is_finite());
        assert!(rep.mse_aligned <= rep.mse_identity + 1e-12);
        assert_eq!(rep.runtime_ms, 0);
    }
    assert_eq!(res.regime, Regime::Dense);
}

#[test]
fn deterministic_and_exec_independent() {
    let mut cfg = small("cosine", vec![30, 40], 0.4, 3);
    let a = run_sweep(&cfg).unwrap();
    cfg.exec = Execution::Sequential;
    let b = run_sweep(&cfg).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    summary::write_csv(&a.rows, &mut x).unwrap();
    summary::write_csv(&b.rows, &mut y).unwrap();
    assert_eq!(x, y);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn seeds_are_paired_across_n() {
    let res = run_sweep(&small("constant", vec![20, 30], 0.3, 2)).unwrap();
    let seeds = |n| res.rows.iter().filter(|r| r.n == n).map(|r| r.seed).collect::<Vec<_>>();
    assert_eq!(seeds(20), seeds(30));
}

#[test]
fn violations_become_failure_rows() {
    let res = run_sweep(&small("cosine", vec![20], 0.8, 2)).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.failures().count(), 2);
    assert!(res.rows[0].status.starts_with("failed: model violation"));
    let mut out = Vec::new();
    summary::write_csv(&res.rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().next().unwrap().ends_with("runtime_ms,status"));
    assert_eq!(text.lines().count(), 3);

    // k * h_min > n
    let mut cfg = small("constant", vec![6], 0.3, 1);
    cfg.k_rule = "ceil(n^0.9)".parse().unwrap();
    let res = run_sweep(&cfg).unwrap();
    assert!(res.rows[0].status.contains("exceeds n"), "{}", res.rows[0].status);
}

#[test]
fn rank_assignment_examples() {
    let p = Partition::new(vec![2, 2]).unwrap();
    let xi = LatentSample::from_values(vec![0.9, 0.1, 0.8, 0.2], 0).unwrap();
    assert_eq!(oracle_rank_assignment(&xi, &p).unwrap().labels(), &[1, 0, 1, 0]);
    let sorted = LatentSample::from_values(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 0).unwrap();
    let p3 = Partition::new(vec![2, 2, 2]).unwrap();
    assert_eq!(oracle_rank_assignment(&sorted, &p3).unwrap().labels(), &[0, 0, 1, 1, 2, 2]);
    // strictly increasing maps preserve ranks
    let cubed = LatentSample::from_values(xi.xi.iter().map(|x| x * x * x).collect(), 0).unwrap();
    assert_eq!(oracle_rank_assignment(&cubed, &p).unwrap(), oracle_rank_assignment(&xi, &p).unwrap());
    assert!(oracle_rank_assignment(&xi, &p3).is_err());
}

#[test]
fn config_toml() {
    let text = r#"
schema_version = 1
graphon = "cosine"
n_list = [100, 200]
k_rule = "ceil(sqrt(n))"
rho_rule = "0.3"
replicates = 4
seed = 11
alignment = "degree_sort"
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.grid, 256);
    assert_eq!(cfg.alignment, Alignment::DegreeSort);
    assert_eq!(cfg.instantiate(100).unwrap().0, 10);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);

    assert!(ExperimentConfig::from_toml(&text.replace("schema_version = 1", "schema_version = 2")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("cosine", "wavy")).is_err());
    assert!(ExperimentConfig::from_toml(&format!("{text}\nbogus = 1")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("ceil(sqrt(n))", "n")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("\"0.3\"", "\"log(n)^2/n\"")).is_err());
}

#[test]
fn summary_and_outputs() {
    let res = run_sweep(&small("bilinear", vec![24, 32, 48], 0.5, 2)).unwrap();
    assert_eq!(res.summary.per_n.len(), 3);
    assert!(res.summary.per_n.iter().all(|s| s.ok == 2));
    assert!(res.summary.slopes["fitted_risk"].is_some());
    let dir = tempfile::tempdir().unwrap();
    let paths = write_outputs(dir.path(), &res, true).unwrap();
    assert_eq!(paths.len(), 3);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_eq!(json["config"]["schema_version"], 1);
    let dat = std::fs::read_to_string(&paths[2]).unwrap();
    assert_eq!(dat.lines().count(), 4);
}
