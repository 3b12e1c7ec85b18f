// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Configuration-driven experiment runner for `graphheat-core`.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
pub mod scenario;
pub mod sweep;

use std::path::Path;

use thiserror::Error;

pub use config::{ConfigError, DatumSpec, GraphSource, ScenarioConfig};
pub use report::{CheckRow, ReportError};
pub use sweep::{dichotomy_sweep, SweepRow, SweepSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Graph(#[from] graphheat_core::GraphError),
    #[error(transparent)]
    Spectral(#[from] graphheat_core::SpectralError),
    #[error(transparent)]
    Heat(#[from] graphheat_core::HeatError),
    #[error(transparent)]
    Mild(#[from] graphheat_core::mild::MildError),
    #[error(transparent)]
    Blowup(#[from] graphheat_core::blowup::BlowupError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Result of a subcommand: `key=value` lines for stdout and whether every
/// scientific check it ran passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            passed: true,
            lines: Vec::new(),
        }
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}={value}"));
    }

    /// Records a named check and folds it into `passed`.
    pub fn check(&mut self, name: &str, ok: bool) {
        self.kv(&format!("check.{name}"), if ok { "pass" } else { "FAIL" });
        self.passed &= ok;
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}
