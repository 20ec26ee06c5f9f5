#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn config(name: &str) -> PathBuf {
    configs_dir().join(name)
}

pub fn socsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socsense"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs `kind` on a config file into `out`; panics with stderr on failure.
pub fn run_ok(kind: &str, cfg: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        kind,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = socsense(&args);
    assert!(
        o.status.success(),
        "{kind} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn read(path: &Path) -> Csv {
        let mut r =
            csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        Csv { header, rows }
    }

    pub fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name} in {:?}", self.header))
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].parse().unwrap()).collect()
    }

    pub fn ints(&self, name: &str) -> Vec<i64> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].parse().unwrap()).collect()
    }
}

/// Value of `key` under `notes:` in manifest.txt.
pub fn manifest_note(dir: &Path, key: &str) -> Option<String> {
    let text = std::fs::read_to_string(dir.join("manifest.txt")).ok()?;
    let prefix = format!("  {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .map(String::from)
}

pub fn transitions(xs: &[i64], from: i64, to: i64) -> usize {
    xs.windows(2).filter(|w| w[0] == from && w[1] == to).count()
}

pub fn changes(xs: &[i64]) -> usize {
    xs.windows(2).filter(|w| w[0] != w[1]).count()
}
