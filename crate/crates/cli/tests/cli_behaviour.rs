//! Exit codes and configuration precedence of the `softood` binary.

use std::path::Path;
use std::process::{Command, Output};

fn softood(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softood"))
        .args(args)
        .current_dir(dir)
        .env_remove("SOFTOOD_OUT_DIR")
        .output()
        .unwrap()
}

fn effective(dir: &Path, out: &str) -> serde_json::Value {
    serde_json::from_str(
        &std::fs::read_to_string(dir.join(out).join("effective_config.json")).unwrap(),
    )
    .unwrap()
}

#[test]
fn missing_input_file_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = softood(
        dir.path(),
        &[
            "score",
            "--features",
            "absent.csv",
            "--head",
            "absent_head.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_config_field_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"kind":"optimal","k":3,"bogus":1}"#,
    )
    .unwrap();
    let out = softood(dir.path(), &["--config", "bad.json", "gen-head"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn invalid_parameter_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = softood(dir.path(), &["gen-head", "--k", "5", "--h", "2"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn flags_override_the_config_file_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("head.json"),
        r#"{"kind":"sandwich","k":3,"h":4,"seed":9}"#,
    )
    .unwrap();
    let out = softood(
        dir.path(),
        &[
            "--out-dir",
            "o",
            "--config",
            "head.json",
            "gen-head",
            "--h",
            "6",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg = effective(dir.path(), "o");
    assert_eq!(cfg["kind"], "sandwich");
    assert_eq!(cfg["h"], 6);
    assert_eq!(cfg["seed"], 9);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = softood(
        dir.path(),
        &[
            "--out-dir",
            "a",
            "gen-head",
            "--kind",
            "optimal",
            "--k",
            "4",
            "--h",
            "7",
            "--seed",
            "2",
        ],
    );
    assert!(first.status.success());
    let second = softood(
        dir.path(),
        &[
            "--out-dir",
            "b",
            "--config",
            "a/effective_config.json",
            "gen-head",
        ],
    );
    assert!(
        second.status.success(),
        "{}",
        String::from_utf8_lossy(&second.stderr)
    );
    for name in ["head.csv", "head_metadata.json", "effective_config.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(name)).unwrap(),
            std::fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}
