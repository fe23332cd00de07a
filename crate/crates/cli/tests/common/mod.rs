#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/mini")
}

pub fn infogap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infogap"))
        .args(args)
        .env_remove("INFOGAP_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = infogap(args);
    assert!(
        out.status.success(),
        "infogap {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Mock-backend arguments for the shipped fixture.
pub fn mock_args(f: &Path) -> Vec<String> {
    vec![
        "--oracle".into(),
        f.join("oracle.jsonl").display().to_string(),
        "--cues".into(),
        f.join("cues.json").display().to_string(),
    ]
}
