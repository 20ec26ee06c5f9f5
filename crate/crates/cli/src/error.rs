use std::path::PathBuf;

use serde::Serialize;
use socsense_core::detection::DetectionError;
use socsense_core::game::GameError;
use socsense_core::incest::IncestError;
use socsense_core::social::SocialError;
use thiserror::Error;

/// One violated precondition in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error("invalid configuration ({} problems)", .0.len())]
    Validation(Vec<ConfigIssue>),
    #[error("cannot write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
    #[error(transparent)]
    Social(#[from] SocialError),
    #[error(transparent)]
    Incest(#[from] IncestError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Machine-readable error record printed on stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub category: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<ConfigIssue>,
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigRead { .. } | CliError::Parse { .. } | CliError::Validation(_) => 2,
            _ => 3,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::ConfigRead { .. } => "config-read",
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Output { .. } => "output",
            CliError::Social(_) => "social-learning",
            CliError::Incest(_) => "incest-removal",
            CliError::Detection(_) => "change-detection",
            CliError::Game(_) => "game-learning",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            status: "error",
            category: self.category(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            line: match self {
                CliError::Parse { line, .. } => *line,
                _ => None,
            },
            issues: match self {
                CliError::Validation(v) => v.clone(),
                _ => Vec::new(),
            },
        }
    }
}
