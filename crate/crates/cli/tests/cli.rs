use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasistatic")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const THERMO: &str = r#"
model = "thermo"
replicas = 1
output_dir = "unused"

[thermo]
potential = "fpu(0.5,1)"
tau = [0.0, 1.0]
beta = [1.0]
"#;

const SSEP: &str = r#"
model = "ssep"
replicas = 4

[ssep]
n = 4
alpha = 1.0
horizon = 0.1
rho_minus = "constant(0.3)"
rho_plus = "constant(0.7)"
"#;

#[test]
fn thermo_writes_artifact_to_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.toml", THERMO);
    let out = tmp.path().join("res");
    let o = run(&["thermo", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["table.csv", "summary.json", "manifest.json", "plot.py", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_and_replica_overrides_reach_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SSEP);
    let out = tmp.path().join("res");
    let o = run(&["ssep", "--config", &cfg, "--seed", "99", "--replicas", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 99);
    assert_eq!(m["replicas"], 3);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.toml", "");
    let o = run(&["ssep", "--config", &empty]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty configuration"));

    assert_eq!(run(&["ssep"]).status.code(), Some(2));

    let bad_alpha = write(tmp.path(), "a.toml", &SSEP.replace("alpha = 1.0", "alpha = 0"));
    let o = run(&["ssep", "--config", &bad_alpha]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let thermo = write(tmp.path(), "t.toml", THERMO);
    assert_eq!(run(&["zr", "--config", &thermo]).status.code(), Some(2));

    assert_eq!(run(&["accept", "--tier", "medium"]).status.code(), Some(2));
}
