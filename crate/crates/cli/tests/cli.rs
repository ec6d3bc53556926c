use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn graphon(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphon")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sample_writes_header_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--graphon", "constant", "--n", "50", "--rho", "0.2", "--seed", "7", "--out", "a.txt"];
    assert_eq!(code(&graphon(&args, dir.path())), 0);
    let first = std::fs::read(dir.path().join("a.txt")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let header: Vec<usize> = text.lines().next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(header[0], 50);
    assert_eq!(header[1], text.lines().count() - 1);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.txt.json")).unwrap()).unwrap();
    assert_eq!(meta["graphon"], "constant");
    assert!(meta.get("xi").is_none());

    assert_eq!(code(&graphon(&args, dir.path())), 0);
    assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), first);
}

#[test]
fn sample_rejects_scale_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphon(&["sample", "--graphon", "cosine", "--n", "50", "--rho", "0.8", "--out", "b.txt"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("model violation"));
    assert!(!dir.path().join("b.txt").exists());
}

#[test]
fn fit_planted_example() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "4 2\n0 1\n2 3\n").unwrap();
    let o = graphon(&["fit", "--input", "p.txt", "--k", "2", "--out", "fit.json"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("loglik 0\n"));
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["assignment"]["labels"], serde_json::json!([0, 0, 1, 1]));
    assert_eq!(fit["profile_loglik"], 0.0);
}

fn loglik(o: &Output) -> f64 {
    stdout(o).lines().find_map(|l| l.strip_prefix("loglik ")).unwrap().parse().unwrap()
}

#[test]
fn exhaustive_fit_is_at_least_as_good() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3"] {
        let s = graphon(&["sample", "--graphon", "cosine", "--n", "8", "--rho", "0.6", "--seed", seed, "--out", "g.txt"], dir.path());
        assert_eq!(code(&s), 0);
        let local = graphon(&["fit", "--input", "g.txt", "--k", "2", "--restarts", "1", "--out", "l.json"], dir.path());
        let exact = graphon(&["fit", "--input", "g.txt", "--k", "2", "--exhaustive", "--out", "e.json"], dir.path());
        assert_eq!((code(&local), code(&exact)), (0, 0));
        assert!(loglik(&exact) >= loglik(&local) - 1e-12);
    }
}

#[test]
fn fit_rejects_infeasible_k() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "5 1\n0 1\n").unwrap();
    let o = graphon(&["fit", "--input", "g.txt", "--k", "3", "--h-min", "2", "--out", "f.json"], dir.path());
    assert_eq!(code(&o), 2);
    let o = graphon(&["fit", "--input", "missing.txt", "--k", "1", "--out", "f.json"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn empty_graph_estimate_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "6 0\n").unwrap();
    let fit = graphon(&["fit", "--input", "g.txt", "--k", "2", "--out", "f.json"], dir.path());
    assert_eq!(code(&fit), 0);
    assert!(stdout(&fit).contains("saturated_fraction 1"));
    let o = graphon(&["estimate", "--fit", "f.json", "--out", "e.json"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn sample_fit_estimate_risk_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&graphon(&["sample", "--graphon", "bilinear", "--n", "60", "--rho", "0.5", "--seed", "3", "--out", "g.txt", "--emit-latents"], d)), 0);
    assert_eq!(code(&graphon(&["fit", "--input", "g.txt", "--k", "4", "--seed", "2", "--out", "f.json"], d)), 0);
    let est = graphon(&["estimate", "--fit", "f.json", "--out", "e.json", "--truth", "bilinear", "--grid", "64"], d);
    assert_eq!(code(&est), 0);
    assert!(stdout(&est).contains("mse_aligned"));
    let risk = graphon(&["risk", "--sample", "g.txt.json", "--fit", "f.json", "--out", "r.json", "--csv", "r.csv", "--grid", "64"], d);
    assert_eq!(code(&risk), 0, "{}", String::from_utf8_lossy(&risk.stderr));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(csv.starts_with("n,k,rho_n,seed,fitted_risk,oracle_risk,excess_risk,mse_identity,mse_aligned,saturated_fraction,loglik,runtime_ms\n"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert!(report["fitted_risk"].as_f64().unwrap() >= 0.0);

    // a fit for a different network is refused
    std::fs::write(d.join("other.txt"), "60 1\n0 1\n").unwrap();
    assert_eq!(code(&graphon(&["fit", "--input", "other.txt", "--k", "4", "--out", "o.json"], d)), 0);
    let bad = graphon(&["risk", "--sample", "g.txt.json", "--fit", "o.json", "--out", "r2.json"], d);
    assert_eq!(code(&bad), 4);
}

#[test]
fn sweep_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.toml"),
        r#"schema_version = 1
graphon = "cosine"
n_list = [20, 30, 40]
k_rule = "ceil(sqrt(n))"
rho_rule = "0.4"
replicates = 2
restarts = 1
seed = 5
grid = 64
"#,
    )
    .unwrap();
    let a = graphon(&["sweep", "--config", "cfg.toml", "--out", "a", "--dat", "--jobs", "1"], d);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = graphon(&["sweep", "--config", "cfg.toml", "--out", "b", "--dat"], d);
    assert_eq!(code(&b), 0);
    for f in ["results.csv", "summary.json", "summary.dat"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(d.join("a/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));

    std::fs::write(d.join("bad.toml"), "schema_version = 9\n").unwrap();
    assert_eq!(code(&graphon(&["sweep", "--config", "bad.toml", "--out", "c"], d)), 2);
}

#[test]
fn selftest_contract() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let ok = graphon(&["selftest", "--verbose"], dir.path());
    assert!(start.elapsed() < Duration::from_secs(60));
    assert_eq!(code(&ok), 0);
    let out = stdout(&ok);
    for name in ["kl-taylor-bounds", "partition-containment", "rho-hat-moments", "likelihood-identity"] {
        assert!(out.contains(&format!("PASS {name}")), "{out}");
    }
    let bad = graphon(&["selftest", "--corrupt-kl"], dir.path());
    assert_ne!(code(&bad), 0);
    assert!(stdout(&bad).contains("FAIL kl-taylor-bounds"));
}
