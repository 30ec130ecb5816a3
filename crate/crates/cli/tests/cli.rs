use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_supg-dlr"))
}

#[test]
fn preset_echoes_published_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["preset", "rotating-body", "--scale", "paper", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("N_h = 16641"), "{text}");
    assert!(text.contains("N_C = 7000"));
    assert!(text.contains("delta = h_K/4"));
    assert!(text.contains("R = 2"));
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[mesh]\nn_per_side = 4\nsurprise = true\n").unwrap();
    let out = bin().args(["solve", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let missing = bin().args(["solve", "--config"]).arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn solve_runs_a_written_preset() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["preset", "boundary-layer", "--scale", "desk", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
    let out = bin()
        .args(["solve", "--config"])
        .arg(dir.path().join("config.toml"))
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run").join("norms.csv").exists());
    assert!(dir.path().join("run").join("run.json").exists());
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["check", "--suite", "oracle", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("PASS"));
}
