use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 7
classes = [8]
world_resolution = 6.0
world_months = 2
calibration_pixels = 2000
max_epochs = 5
boost_max_epochs = 3
boost_replicates = 1
test_replicates = 1
"#;

fn salinity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salinity"))
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = salinity(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn stages_run_separately_and_report_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("tiny.toml"), TINY).unwrap();

    let early = salinity(dir, &["train", "--kind", "b1"]);
    assert!(!early.status.success());
    assert!(String::from_utf8_lossy(&early.stderr).contains("missing"));

    ok(dir, &["calibrate"]);
    ok(dir, &["build-world"]);
    ok(dir, &["build-db", "--kind", "b1"]);
    ok(dir, &["build-db", "--kind", "b2"]);
    ok(dir, &["train", "--kind", "b1"]);
    ok(dir, &["train", "--kind", "b2"]);
    let boost = ok(dir, &["boost"]);
    assert!(boost.contains("b3 class 8"), "{boost}");
    let eval = ok(dir, &["evaluate", "--net", "b1", "--net", "b3"]);
    assert!(eval.contains("b1 class 8") && eval.contains("b3 class 8"), "{eval}");

    let out = dir.join("out");
    for f in ["noise/class8.csv", "world.csv", "db/b1_class8.csv", "nets/b3_class8.txt", "config.resolved.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let reports = out.join("reports");
    let a = reports.join("b1_class8_stats.csv");
    let b = reports.join("b3_class8_stats.csv");
    let diff = ok(dir, &["report-diff", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(diff.contains("slope"), "{diff}");
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.toml"), "per_box = 0\n").unwrap();
    let out = salinity(tmp.path(), &["build-world"]);
    assert!(!out.status.success());
    fs::write(tmp.path().join("tiny.toml"), "no_such_key = 1\n").unwrap();
    assert!(!salinity(tmp.path(), &["build-world"]).status.success());
}
