//! End-to-end behavior of the `fjsim` binary.

use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_fjsim");

const CONFIG: &str = r#"{
  "experiment": "secrecy_vs_snr",
  "antennas": {"nt": 4, "nr": 2, "ne": 2},
  "snr_grid_db": [0, 10],
  "mc_draws": 300,
  "seed": 5
}"#;

#[test]
fn schema_output_is_a_valid_config() {
    let out = Command::new(BIN).arg("schema").output().unwrap();
    assert!(out.status.success());
    fjsim::harness::ExperimentConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
}

#[test]
fn invalid_config_fails_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"experiment\": \"secrecy_vs_snr\",\n  \"antenas\": 3\n}").unwrap();
    let out = Command::new(BIN).arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("antenas") && err.contains("line 3"), "{err}");
}

#[test]
fn reruns_are_byte_identical_and_env_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let st = Command::new(BIN).args(["run", cfg.to_str().unwrap(), "--workers", "1", "--out"]).arg(&a).status().unwrap();
    assert!(st.success());
    let st = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--workers", "3"])
        .env("FJSIM_OUT_DIR", &b)
        .status()
        .unwrap();
    assert!(st.success());
    let ra = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("results.csv")).unwrap());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["outputs"][0]["sha256"], fjsim::harness::blob_digest(&ra));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("o");
    let st = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--seed", "9", "--mc-draws", "150", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(11) == Some("150")), "{text}");
}

#[test]
fn compare_writes_one_block_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG.replace("\"seed\": 5", "\"seed\": 5, \"schemes\": [\"conventional_exhaustive\", \"aefj\"], \"train\": {\"generator_steps\": 50}")).unwrap();
    let out = dir.path().join("o");
    let st = Command::new(BIN).args(["compare", cfg.to_str().unwrap(), "--out"]).arg(&out).status().unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    for s in ["conventional_exhaustive", "aefj"] {
        assert_eq!(text.lines().filter(|l| l.contains(&format!(",{s},secrecy_rate,"))).count(), 2);
    }
}
