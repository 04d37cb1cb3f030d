use std::path::Path;
use std::process::{Command, Output};

fn herzsq(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herzsq"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn check_weight_writes_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = herzsq(dir.path(), &["check-weight", "--a", "0", "--p", "1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("weight_a0.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        let est: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!((est - 1.0).abs() < 1e-9, "{r}");
    }
}

#[test]
fn atoms_feed_the_square_function_with_cache_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"extent": 16, "atoms": {"count": 2, "r_min_exp": 0, "r_max_exp": 0}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = herzsq(dir.path(), &["--config", cfg, "--resolution", "8", "make-atoms"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let atom = dir.path().join("atom_00.csv");
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("atom_00.json")).unwrap()).unwrap();
    assert_eq!(side["k0"], 1);

    let cache = dir.path().join("cache.csv");
    let args = [
        "--config", cfg, "--resolution", "8", "square-function", "--op", "g", "--input",
        atom.to_str().unwrap(), "--cache", cache.to_str().unwrap(), "--x", "0.0625,2.0625",
    ];
    let first = herzsq(dir.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(cache.exists());
    let second = herzsq(dir.path(), &args);
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stderr).contains("reusing cache"));
    assert_eq!(first.stdout, second.stdout);

    // a different input must not reuse the cache
    let other = dir.path().join("atom_01.csv");
    let mut bad = args;
    bad[8] = other.to_str().unwrap();
    let o = herzsq(dir.path(), &bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash mismatch"));
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = herzsq(dir.path(), &["verify", "weights"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("weights.json").exists());
    assert!(dir.path().join("timings.json").exists());

    // an impossible tolerance makes the check fail with exit code 1
    let cfg = dir.path().join("strict.json");
    std::fs::write(&cfg, r#"{"tolerances": {"weights_abs": -1}}"#).unwrap();
    let o = herzsq(dir.path(), &["--config", cfg.to_str().unwrap(), "verify", "weights"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn hypothesis_violations_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = herzsq(dir.path(), &["--beta", "1", "verify", "theorem3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
    let o = herzsq(dir.path(), &["--dim", "3", "verify", "weights"]);
    assert!(!o.status.success());
}
