//! Driver behaviour: exit codes, config validation, catalog.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_envqueue"))
}

#[test]
fn list_builtins_has_catalog_names() {
    let out = bin().arg("list-builtins").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "two-state",
        "ex2.1-cyclic",
        "ex2.2-shift",
        "case-a-rbm-arrival",
        "case-c-cone",
        "ex3.1-theta-drift",
        "ex3.1-threshold-rbm",
        "ex3.2-threshold-service",
    ] {
        assert!(text.contains(name), "catalog missing {name}:\n{text}");
    }
}

#[test]
fn malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.toml");
    // alpha must exceed 1; the error message names the field.
    std::fs::write(&p, "kind = \"mgf-lemma\"\n[run]\nalpha = 0.5\n").unwrap();
    let out = bin().arg("run").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpha"), "stderr: {err}");
}

#[test]
fn unknown_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.toml");
    std::fs::write(&p, "kind = \"tv-decay\"\n[run]\nbogus_knob = 3\n").unwrap();
    let out = bin().arg("run").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.toml");
    std::fs::write(&good, "kind = \"rate-certificate\"\n").unwrap();
    let out = bin().arg("validate").arg(&good).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("hash="));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "kind = \"nope\"\n").unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("tight.toml");
    // A tolerance no finite run can meet forces an assertion failure.
    std::fs::write(
        &p,
        "kind = \"stationary-diffusive\"\n[run]\nhorizon = 50.0\ndt = 0.001\n\
         replicas = 1\ntolerance = 1e-9\nn_max = 6\nbins = 8\n",
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&p)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[FAIL]"), "{text}");
}

#[test]
fn reports_embed_hash_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("c.toml");
    std::fs::write(&p, "kind = \"rate-certificate\"\n").unwrap();
    let out_dir = tmp.path().join("o");
    let st = bin()
        .arg("run")
        .arg(&p)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(st.success());
    let report_path = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with("report.json"))
        .unwrap();
    let text = std::fs::read_to_string(report_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["tool"], "envqueue");
    assert!(v["version"].as_str().unwrap().contains('.'));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn seed_override_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("c.toml");
    std::fs::write(
        &p,
        "kind = \"rate-certificate\"\n[run]\nalpha = 2.0\ngamma = 1.0\nlambda_bar = 1.0\nmu_bar = 4.0\n",
    )
    .unwrap();
    let mut names = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = tmp.path().join(format!("s{seed}"));
        let out = bin()
            .arg("run")
            .arg(&p)
            .args(["--seed", seed, "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut files: Vec<_> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        files.sort();
        names.push(files);
    }
    assert_ne!(names[0], names[1], "seed must enter the artifact names");
}
