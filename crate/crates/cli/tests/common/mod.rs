#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hyperdetect")
}

/// Runs a subcommand with `settings` written to a config file inside `out`.
pub fn run(cmd: &str, out: &Path, settings: &str, flags: &[&str]) -> Output {
    std::fs::create_dir_all(out).unwrap();
    let cfg = out.join(format!("{cmd}.cfg"));
    std::fs::write(&cfg, settings).unwrap();
    Command::new(bin())
        .arg(cmd)
        .arg("--out")
        .arg(out)
        .arg("--config")
        .arg(&cfg)
        .args(flags)
        .output()
        .expect("binary runs")
}

pub fn ok(cmd: &str, out: &Path, settings: &str, flags: &[&str]) -> Output {
    let o = run(cmd, out, settings, flags);
    assert!(
        o.status.success(),
        "{cmd} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn num(v: &serde_json::Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("`{key}` missing in {v}"))
}
