use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mpxsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpxsim")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
name = "tiny"
models = ["gillespie"]
n_nodes = 200
ensemble_size = 3
seed = 1
t_max = 10.0
sample_dt = 1.0

[[networks]]
info = { kind = "regular", k = 3 }
phy = { kind = "poisson", mean = 3.0 }
"#;

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = mpxsim(&["validate", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            assert!(stdout(&out).contains(": ok ("));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn run_writes_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("fig3.toml");
    let out = mpxsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scenario_dir = PathBuf::from(stdout(&out).trim());
    let sweep = fs::read_to_string(scenario_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("point,network,ap0,gamma_info,model,"));
    assert!(scenario_dir.join("metadata.json").exists());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out_dir = dir.path().join("out");
    let out = mpxsim(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "99",
        "--ensemble",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = fs::read_to_string(out_dir.join("tiny/metadata.json")).unwrap();
    assert!(meta.contains("\"seed\": 99"), "{meta}");
    let summary = fs::read_to_string(out_dir.join("tiny/p000/gillespie/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn export_network_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let edges = dir.path().join("net/edges.txt");
    let out = mpxsim(&["export-network", cfg.to_str().unwrap(), "--out", edges.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&edges).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("nodes 200"));
    let info = lines.clone().filter(|l| l.starts_with("info ")).count();
    assert!(info > 0 && info <= 300);
    assert!(lines.all(|l| l.starts_with("info ") || l.starts_with("phy ")));

    let missing = mpxsim(&["export-network", cfg.to_str().unwrap(), "--out", edges.to_str().unwrap(), "--network", "nope"]);
    assert!(!missing.status.success());
}

#[test]
fn bad_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"bad\"\nmodels = [\"gillespie\"]\n").unwrap();
    let out = mpxsim(&["validate", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("network"));

    fs::write(&cfg, TINY).unwrap();
    let out = mpxsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "0"]);
    assert!(!out.status.success());
}
