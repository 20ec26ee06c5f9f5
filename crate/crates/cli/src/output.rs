//! CSV files and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::ScenarioKind;
use crate::error::CliError;

/// Fixed scientific notation, enough digits to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered CSV table; rows are counted for the manifest.
pub struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &'static str, header: impl IntoIterator<Item = S>) -> Self {
        Table {
            name,
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn write(&self, dir: &Path) -> Result<OutputFile, CliError> {
        let path = dir.join(self.name);
        let fail = |e: csv::Error| CliError::Output {
            path: path.clone(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(fail)?;
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(OutputFile {
            name: self.name.to_string(),
            rows: self.rows.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub engine: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub duration_secs: f64,
    pub outputs: Vec<OutputFile>,
    pub notes: Vec<(String, String)>,
}

impl RunManifest {
    pub fn note(&self, key: &str) -> Option<&str> {
        self.notes
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Everything a scenario produced, before it touches the disk.
#[derive(Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub notes: Vec<(String, String)>,
}

impl RunOutput {
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

/// Writes the tables, then `manifest.txt`.
pub fn write_outputs(
    dir: &Path,
    kind: ScenarioKind,
    seed: u64,
    output: RunOutput,
    duration: Duration,
    source: &str,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let outputs = output
        .tables
        .iter()
        .map(|t| t.write(dir))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        engine: format!("socsense {}", env!("CARGO_PKG_VERSION")),
        kind,
        seed,
        out_dir: dir.to_path_buf(),
        duration_secs: duration.as_secs_f64(),
        outputs,
        notes: output.notes,
    };
    let path = dir.join("manifest.txt");
    std::fs::write(&path, render_manifest(&manifest, source)).map_err(|e| CliError::Output {
        path,
        message: e.to_string(),
    })?;
    Ok(manifest)
}

fn render_manifest(m: &RunManifest, source: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "engine: {}", m.engine);
    let _ = writeln!(s, "kind: {}", m.kind);
    let _ = writeln!(s, "seed: {}", m.seed);
    let _ = writeln!(s, "duration_secs: {:.3}", m.duration_secs);
    s.push_str("outputs:\n");
    for o in &m.outputs {
        let _ = writeln!(s, "  {} ({} rows)", o.name, o.rows);
    }
    s.push_str("notes:\n");
    for (k, v) in &m.notes {
        let _ = writeln!(s, "  {k}: {v}");
    }
    s.push_str("config:\n");
    for line in source.lines() {
        let _ = writeln!(s, "  | {line}");
    }
    s
}
