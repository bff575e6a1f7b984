use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cantor-harmonic"))
}

#[test]
fn config_reference_is_a_valid_config() {
    let out = bin().arg("config-reference").output().unwrap();
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    let st = bin()
        .args(["sample", "--walkers", "500", "--depth", "2", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
}

#[test]
fn sample_writes_result_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sample", "--walkers", "2000", "--depth", "3", "--seed", "9", "--workers", "2", "--plots", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sample.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "sample");
    assert_eq!(json["inputs"]["seed"], 9);
    assert_eq!(json["metrics"]["n_effective"]["value"], 2000.0);
    assert!(dir.path().join("sample_table.csv").exists());
    assert!(dir.path().join("sample_generation1.svg").exists());
}

#[test]
fn config_file_selects_sequence_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "seed = 4\nworkers = 1\n[sequence]\nkind = \"periodic\"\nvalues = [0.2, 0.3]\n[wos]\ndepth = 3\n[campaign]\nwalkers = 3000\n[bootstrap]\nresamples = 20\n",
    )
    .unwrap();
    let st = bin().arg("dims").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(dir.path().join("dims.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["inputs"]["wos"]["depth"], 3);
    assert!(json["metrics"]["dim_omega"]["uncertainty"].as_f64().unwrap() > 0.0);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // cost guard
    let out = bin()
        .args(["oracle-compare", "--depth", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cost guard"));
    // precondition
    let st = bin().args(["harnack", "--depth", "3", "--out"]).arg(dir.path()).status().unwrap();
    assert!(!st.success());
    // malformed config
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[wos]\ndepht = 3\n").unwrap();
    let st = bin().arg("gap").arg("--config").arg(&cfg).status().unwrap();
    assert!(!st.success());
    // missing config
    let st = bin().args(["gap", "--config", "/nonexistent/c.toml"]).status().unwrap();
    assert!(!st.success());
    // invalid sequence
    let cfg = dir.path().join("seq.toml");
    std::fs::write(&cfg, "[sequence]\nvalues = [0.5]\n").unwrap();
    let st = bin().arg("sample").arg("--config").arg(&cfg).status().unwrap();
    assert!(!st.success());
    assert!(!dir.path().join("oracle-compare.json").exists());
}
