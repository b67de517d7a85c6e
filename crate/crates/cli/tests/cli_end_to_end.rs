//! End-to-end tests of the `spinnet` binary: subcommands, exit codes, and
//! output files.

use std::path::Path;
use std::process::{Command, Output};

fn spinnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn overhead_experiment_writes_expected_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "overhead.toml",
        r#"
experiment = "overhead"
output_path = "overhead.csv"

[overhead]
surface_phys_per_logical = 3000
qldpc_n = 1000
qldpc_k = 100
"#,
    );
    let out = spinnet(&["simulate", "overhead", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("overhead.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,sweep_param,sweep_value,metric,value,stderr,trials,seed,status"
    );
    assert!(csv.contains("overhead_ratio,300,"));
}

#[test]
fn rerunning_same_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "qkd.toml",
        r#"
experiment = "qkd_single_hub"
seed = 7
output_path = "a.csv"

[qkd]
rounds = 400
single_photon_source = true
"#,
    );
    let first = spinnet(&["simulate", "qkd_single_hub", "--config", &cfg], dir.path());
    assert!(first.status.success());
    let second = spinnet(
        &["simulate", "qkd_single_hub", "--config", &cfg, "--out", "b.csv"],
        dir.path(),
    );
    assert!(second.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn validation_failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_range = write_config(
        dir.path(),
        "bad.toml",
        r#"
experiment = "bell_pair_curve"
[emitters.alice]
efficiency = 1.5
"#,
    );
    let out = spinnet(&["validate", "--config", &bad_range], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("emitters.alice"), "{msg}");

    let unknown_key = write_config(
        dir.path(),
        "unknown.toml",
        "experiment = \"overhead\"\nmystery = 1\n",
    );
    let out = spinnet(&["validate", "--config", &unknown_key], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_name_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "o.toml", "experiment = \"overhead\"\n");
    let out = spinnet(&["simulate", "connectivity", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = spinnet(&["simulate", "not_an_experiment", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinnet(&["validate", "--config", "does_not_exist.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn valid_config_passes_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gen1.toml",
        r#"
experiment = "repeater_gen1"
[gen1]
links = 4
"#,
    );
    let out = spinnet(&["validate", "--config", &cfg], dir.path());
    assert!(out.status.success());
}

#[test]
fn connectivity_prints_aligned_table_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "conn.toml",
        r#"
experiment = "connectivity"
output_path = "conn.csv"

[connectivity]
block_size = 7
interconnects = 2
"#,
    );
    let out = spinnet(&["simulate", "connectivity", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("depth"), "{stdout}");
    assert!(stdout.contains("interconnects"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("conn.csv")).unwrap();
    assert!(csv.contains("depth,4,"));
}

#[test]
fn schema_prints_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinnet(&["schema"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("940 ns"));
    assert!(stdout.contains("Sweepable parameter paths"));
}

#[test]
fn shipped_example_configs_validate() {
    let dir = tempfile::tempdir().unwrap();
    let configs_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut checked = 0;
    for entry in std::fs::read_dir(configs_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            let out = spinnet(&["validate", "--config", path.to_str().unwrap()], dir.path());
            assert!(
                out.status.success(),
                "{}: {}",
                path.display(),
                String::from_utf8_lossy(&out.stderr)
            );
            checked += 1;
        }
    }
    assert!(checked >= 6, "expected shipped example configs, found {checked}");
}
