use std::fs;
use std::path::Path;

use quasistatic::harness::{run_experiment, run_sweep, ExperimentConfig, Manifest};
use quasistatic::Error;

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn header(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap().lines().next().unwrap().to_string()
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SSEP: &str = r#"
model = "ssep"
replicas = 8
master_seed = 17

[ssep]
n = 6
alpha = 1.0
horizon = 0.5
rho_minus = "affine(0.2, 0.4)"
rho_plus = "sine(0.6, 0.2, 0.3)"
initial = "bernoulli(0.5)"
snapshot_times = [0.1, 0.5]
"#;

#[test]
fn same_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_experiment(&config(SSEP, &a)).unwrap();
    run_experiment(&config(SSEP, &b)).unwrap();
    let ma = read_manifest(&a);
    assert!(ma.files.iter().any(|f| f.name == "snapshots.csv"));
    for f in ma.files.iter().map(|f| f.name.as_str()).chain(["manifest.json"]) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let other = tmp.path().join("c");
    let mut cfg = config(SSEP, &other);
    cfg.master_seed += 1;
    run_experiment(&cfg).unwrap();
    assert_ne!(fs::read(a.join("snapshots.csv")).unwrap(), fs::read(other.join("snapshots.csv")).unwrap());
    assert_ne!(read_manifest(&other).config_sha256, ma.config_sha256);
}

#[test]
fn ssep_artifact_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = run_experiment(&config(SSEP, dir)).unwrap();
    assert_eq!(header(dir, "snapshots.csv"), "replica,t_macro,x,eta");
    let rows = fs::read_to_string(dir.join("snapshots.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 8 * 2 * 13);
    let events: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("events.json")).unwrap()).unwrap();
    for k in ["events_total", "events_boundary", "events_thinned_rejections"] {
        assert!(events[k].is_u64(), "{k}");
    }
    assert!(header(dir, "profile.csv").starts_with("t_macro,x,y,mean,stderr,reference,provenance"));
    let m = read_manifest(dir);
    assert_eq!(m.model, "ssep");
    assert_eq!(m.code_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config_sha256.len(), 64);
    for f in ["config.toml", "events.json", "plot.py", "profile.csv", "snapshots.csv", "summary.json"] {
        assert!(m.files.iter().any(|e| e.name == f), "{f} missing from manifest");
    }
    assert!(summary.stats.iter().all(|s| s.reference_value.is_none() == s.provenance.is_none()));
    // The stored configuration reproduces the run.
    let stored = ExperimentConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(stored.master_seed, 17);
}

#[test]
fn sweep_has_one_row_per_size_and_statistic() {
    let text = SSEP.replace("replicas = 8", "replicas = 2").replace("horizon = 0.5", "horizon = 0.02")
        .replace("snapshot_times = [0.1, 0.5]", "snapshot_times = [0.02]\nwrite_snapshots = false")
        + "\n[sweep]\nn = [16, 32, 64]\n";
    let tmp = tempfile::tempdir().unwrap();
    let table = run_sweep(&config(&text, tmp.path())).unwrap();
    let mut names: Vec<&str> = table.rows.iter().map(|r| r.statistic_name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    assert!(!names.is_empty());
    for name in names {
        let ns: Vec<usize> = table.rows_for(name).map(|r| r.n).collect();
        assert_eq!(ns, vec![16, 32, 64], "{name}");
    }
    for r in &table.rows {
        assert_eq!(r.reference_value.is_some(), r.provenance.is_some());
    }
    assert_eq!(
        header(tmp.path(), "convergence.csv"),
        "N,alpha,statistic_name,value,stderr,reference_value,abs_err,provenance"
    );
    for n in [16, 32, 64] {
        assert!(tmp.path().join(format!("N{n}_alpha1/manifest.json")).exists());
    }
    let m = read_manifest(tmp.path());
    assert!(m.files.iter().any(|f| f.name == "N32_alpha1/manifest.json"));
}

#[test]
fn nonpositive_alpha_rejected() {
    for bad in ["alpha = 0.0", "alpha = -0.5"] {
        let err = ExperimentConfig::from_toml(&SSEP.replace("alpha = 1.0", bad)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("positive"), "{msg}");
    }
    let sweep = format!("{SSEP}\n[sweep]\nalpha = [0.5, 0.0]\n");
    assert!(ExperimentConfig::from_toml(&sweep).is_err());
}

#[test]
fn empty_or_incomplete_config_is_usage_error() {
    assert!(matches!(ExperimentConfig::from_toml(""), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::from_toml("model = \"dual\""), Err(Error::Config(_))));
    assert!(matches!(
        ExperimentConfig::from_toml(&SSEP.replace("n = 6", "n = 6\nsize = 3")),
        Err(Error::Config(_))
    ));
}

#[test]
fn budget_enforced() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(SSEP, tmp.path());
    cfg.max_work = 1e3;
    assert!(matches!(run_experiment(&cfg), Err(Error::Budget(_))));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn zero_range_outputs() {
    let text = r#"
model = "zero_range"
replicas = 4
master_seed = 2

[zero_range]
n = 5
alpha = 0.5
rate = "power(0.5)"
lambda_minus = "constant(0.4)"
lambda_plus = "affine(0.6, 0.2)"
initial = "equilibrium(0.5)"
block = 4
"#;
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(text, tmp.path())).unwrap();
    assert_eq!(header(tmp.path(), "snapshots.csv"), "replica,t_macro,x,eta");
    assert!(header(tmp.path(), "profile.csv").starts_with("t_macro,first,last,y,mean,stderr,reference"));
    let blocks = fs::read_to_string(tmp.path().join("profile.csv")).unwrap().lines().count() - 1;
    assert_eq!(blocks, 3);
}

#[test]
fn chain_outputs() {
    let text = r#"
model = "chain"
replicas = 3
master_seed = 9

[chain]
n = 8
alpha = 0.25
horizon = 0.05
potential = "fpu(0.3,1)"
beta = "affine(1.0, 1.0)"
tension = "affine(0.0, 1.0)"
snapshot_times = [0.025, 0.05]
block = 4
"#;
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = run_experiment(&config(text, dir)).unwrap();
    assert_eq!(header(dir, "snapshots.csv"), "replica,t_macro,x,r,p");
    assert_eq!(header(dir, "ledger.csv"), "replica,t_macro,U,W,Q,residual");
    let cl: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("clausius.json")).unwrap()).unwrap();
    let rows = cl.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for k in ["t", "W", "dF", "residual", "alpha", "N"] {
        assert!(rows[0].get(k).is_some(), "{k}");
    }
    assert_eq!(rows[0]["N"], 8);
    let residual = summary.stats.iter().find(|s| s.statistic == "first_law_max_residual").unwrap();
    assert!(residual.value < 1e-3);
}

#[test]
fn dual_outputs() {
    let text = r#"
model = "dual"
replicas = 200
master_seed = 4

[dual]
n = 3
alpha = 1.0
t = 0.2
rho_minus = "constant(0.1)"
rho_plus = "constant(0.9)"
sites = [-1, 2]
survival_grid = [0.5, 1.0, 2.0]
"#;
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let summary = run_experiment(&config(text, dir)).unwrap();
    assert_eq!(header(dir, "walkers.csv"), "replica,walker,absorbed,exit_side,tau");
    assert_eq!(fs::read_to_string(dir.join("walkers.csv")).unwrap().lines().count(), 1 + 400);
    assert_eq!(header(dir, "survival.csv"), "s,tail,stderr");
    for s in &summary.stats {
        if let Some(r) = s.reference_value {
            if s.statistic.starts_with("one_point") || s.statistic == "joint_moment" {
                assert!((s.value - r).abs() <= 4.0 * s.stderr + 1e-12, "{}: {} vs {r}", s.statistic, s.value);
            }
        }
    }
}

#[test]
fn oracle_and_thermo_outputs() {
    let oracle = r#"
model = "oracle"
replicas = 1

[oracle]
n = 8
alpha = 1.0
t = 0.5
rho_minus = "constant(0.2)"
rho_plus = "constant(0.8)"
"#;
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("oracle");
    run_experiment(&config(oracle, &dir)).unwrap();
    assert_eq!(header(&dir, "one_point.csv"), "x,rho");
    assert_eq!(header(&dir, "two_point.csv"), "x1,x2,v");
    assert_eq!(fs::read_to_string(dir.join("two_point.csv")).unwrap().lines().count(), 1 + 17 * 16 / 2);
    let cmp: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("comparison.json")).unwrap()).unwrap();
    for k in ["max_abs_err", "which_formula_closer", "fitted_rate"] {
        assert!(cmp.get(k).is_some(), "{k}");
    }

    let thermo = r#"
model = "thermo"
replicas = 1

[thermo]
potential = "harmonic"
tau = [-0.5, 0.0, 1.0]
beta = [1.0, 2.0]
"#;
    let dir = tmp.path().join("thermo");
    run_experiment(&config(thermo, &dir)).unwrap();
    let table = fs::read_to_string(dir.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "tau,beta,G,r,u");
    // Harmonic springs: r = τ and u = 1/β + τ²/2.
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - v[0]).abs() < 1e-9);
        assert!((v[4] - (1.0 / v[1] + 0.5 * v[0] * v[0])).abs() < 1e-9);
    }
}
