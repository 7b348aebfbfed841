use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nsring(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsring")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn shipped_config() -> String {
    String::from_utf8(nsring(&["--print-config"]).stdout).unwrap()
}

#[test]
fn printed_config_is_accepted_back() {
    let dir = scratch("print_config");
    let text = shipped_config();
    assert!(text.contains("[profile]") && text.contains("family = \"tail_p2\""));
    let path = dir.join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let parsed = nsring::config::RunConfig::load(&path).unwrap();
    assert_eq!(parsed, nsring::config::RunConfig::default());
}

#[test]
fn unknown_stage_exits_with_config_code() {
    let out = nsring(&["--stage", "warp-drive"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown stage"));
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = scratch("invalid_config");
    let bad = shipped_config().replace("betas = [", "bogus_key = 1\nbetas = [");
    let path = dir.join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = nsring(&["--config", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let empty_sweep = shipped_config().replace("truncation_radii = [8.0, 16.0, 32.0]", "truncation_radii = []");
    std::fs::write(&path, empty_sweep).unwrap();
    let out = nsring(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = nsring(&["--config", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_amplitude_reports_no_instability() {
    let dir = scratch("zero_amp");
    let cfg = shipped_config().replace("amp = 2.5", "amp = 0.0");
    let path = dir.join("zero.toml");
    std::fs::write(&path, cfg).unwrap();
    let out_dir = dir.join("out");
    let out = nsring(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 3);
    let stages = report["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 1);
    assert_eq!(stages[0]["stage"], "search2d");
    assert_eq!(stages[0]["status"], "error");
    assert!(stages[0]["message"].as_str().unwrap().contains("no unstable eigenvalue"));

    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("search2d.cert.json")).unwrap()).unwrap();
    assert_eq!(cert["passed"], false);
    assert!(!out_dir.join("truncate.cert.json").exists());
}
