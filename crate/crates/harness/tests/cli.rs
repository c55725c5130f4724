use std::path::Path;
use std::process::{Command, Output};

fn oel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oel")).args(args).output().expect("binary runs")
}

fn config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml").display().to_string()
}

#[test]
fn smoke_run_writes_results_and_summarize_rereads_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let out_str = out.display().to_string();
    let run = oel(&["run", "--config", &config(), "--smoke", "--variant", "hgrail", "--epochs", "50", "--out", &out_str]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("hgrail (2 runs)"), "{stdout}");
    assert!(stdout.contains("competence at epoch 50"));
    for file in ["manifest.json", "summary.json", "competence_hgrail.csv", "discovery_hgrail.json", "runs/hgrail/run_01/epochs.jsonl"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    assert!(!out.join("competence_s-gd.csv").exists());

    let again = oel(&["summarize", "--in", &out_str]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), stdout);
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "runs = 0\n").unwrap();
    let out = oel(&["run", "--config", &bad.display().to_string(), "--out", &dir.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "{stderr}");
    assert!(stderr.contains("bad.toml"), "{stderr}");

    let missing = oel(&["summarize", "--in", &dir.path().join("nowhere").display().to_string()]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8(missing.stderr).unwrap().contains("manifest.json"));
}
