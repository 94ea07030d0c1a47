//! End-to-end runs of the `contact` binary: exit codes, run directories and
//! byte-for-byte reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn contact(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contact"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("CONTACT_THREADS", "1")
        .output()
        .expect("binary runs")
}

/// Run directory printed on the last stdout line.
fn run_dir(output: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("run directory: "))
        .unwrap_or_else(|| panic!("no run directory in {stdout:?}"));
    PathBuf::from(line)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn invalid_configuration_exits_2_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("two_node.toml"))
        .unwrap()
        .replace("rho = 1.0", "rho = -1.0");
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, text).unwrap();
    let out = tmp.path().join("out");
    let o = contact(&["hierarchy"], &config, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.rho"));
    assert!(!out.exists());
}

#[test]
fn missing_configuration_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = contact(&["check"], &tmp.path().join("absent.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn extinction_exits_3_with_zero_density() {
    let tmp = tempfile::tempdir().unwrap();
    let o = contact(&["fk"], &configs().join("two_node.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let dir = run_dir(&o);
    let fk = read(&dir, "fk.csv");
    let rows: Vec<&str> = fk.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(
        rows.iter().all(|r| r.split(',').nth(1) == Some("0")),
        "{fk}"
    );
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "manifest.json")).unwrap();
    assert_eq!(manifest["exit_code"], 3);
}

#[test]
fn hierarchy_runs_are_reproducible_and_listed_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs().join("two_node.toml");
    let first = contact(&["hierarchy"], &config, &tmp.path().join("a"));
    let second = contact(&["hierarchy"], &config, &tmp.path().join("b"));
    let (da, db) = (run_dir(&first), run_dir(&second));
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(da.file_name(), db.file_name());
    assert!(da
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("hierarchy-"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&da, "manifest.json")).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for entry in outputs {
        let name = entry["file"].as_str().unwrap();
        if name.ends_with(".csv") {
            assert_eq!(read(&da, name), read(&db, name), "{name}");
        }
    }
    assert_eq!(manifest["manifest_version"], 1);
    assert_eq!(manifest["threads"], 1);
}

#[test]
fn simulation_depends_only_on_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("torus.toml"))
        .unwrap()
        .replace("ensemble = 2000", "ensemble = 200");
    let config = tmp.path().join("torus.toml");
    std::fs::write(&config, text).unwrap();
    let a = contact(&["simulate"], &config, &tmp.path().join("a"));
    let b = contact(&["simulate"], &config, &tmp.path().join("b"));
    let c = contact(
        &["simulate", "--seed", "99"],
        &config,
        &tmp.path().join("c"),
    );
    for o in [&a, &b, &c] {
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let (da, db, dc) = (run_dir(&a), run_dir(&b), run_dir(&c));
    assert_eq!(read(&da, "k1.csv"), read(&db, "k1.csv"));
    assert_eq!(read(&da, "k2.csv"), read(&db, "k2.csv"));
    assert_ne!(da.file_name(), dc.file_name());
    assert_ne!(read(&da, "k1.csv"), read(&dc, "k1.csv"));
}
