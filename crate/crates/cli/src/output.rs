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

//! Artifact writing: CSV tables, text files and the hash manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Reals in CSV: scientific notation with 17 significant digits.
pub fn real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Optional real; empty cell when absent.
pub fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

/// Collects files written under one output directory.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    generated_at_unix: u64,
    files: Vec<ManifestEntry>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        self.record(name);
        Ok(p)
    }

    /// Writes a CSV with a mandatory header; every row must match its width.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| CliError::Csv(e.to_string()))?;
        w.write_record(header).map_err(|e| CliError::Csv(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))?;
        self.record(name);
        Ok(p)
    }

    /// Registers a file written by other means (e.g. a saved graph).
    pub fn record(&mut self, name: &str) {
        let p = self.path(name);
        if !self.files.contains(&p) {
            self.files.push(p);
        }
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Writes `manifest.json` with the SHA-256 of every recorded file.
    pub fn finish(self, command: &str, seed: u64) -> Result<PathBuf, CliError> {
        let mut files = Vec::with_capacity(self.files.len());
        for p in &self.files {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            files.push(ManifestEntry {
                path: p
                    .strip_prefix(&self.dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned(),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len(),
            });
        }
        let manifest = Manifest {
            command,
            seed,
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            files,
        };
        let p = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Csv(e.to_string()))?;
        fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_format_has_17_digits() {
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(real(-0.171573), "-1.7157300000000000e-1");
        assert_eq!(real(f64::INFINITY), "inf");
        assert_eq!(opt_real(None), "");
    }

    #[test]
    fn manifest_hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path()).unwrap();
        a.write_csv("t.csv", &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        let m = a.finish("test", 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["files"][0]["path"], "t.csv");
        assert_eq!(
            v["files"][0]["sha256"],
            hex::encode(Sha256::digest(b"a,b\n1,2\n"))
        );
    }
}
