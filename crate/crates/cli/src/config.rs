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

//! Scenario configuration (TOML).
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [graph]
//! spec = "tree:d=3,r=8,mu=unit"     # or: file = "ball.txt"
//!
//! [source]
//! kind = "exponential"              # constant | exponential | power | table
//! alpha = 0.05                      # h0 / beta / nodes = [[0, 1], [2, 3]]
//!
//! [datum]
//! kind = "kernel"                   # constant | kernel | point | file
//! eps = 0.01
//! gamma = 1.0
//!
//! [solver]
//! q = 2.0
//! horizon = 100.0
//!
//! [sweep]
//! alpha = [0.05, 0.30]
//! ```

use std::path::{Path, PathBuf};

use graphheat_core::source::SourceSpec;
use graphheat_core::{load_graph, GraphSpec, TruncatedDomain};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field '{path}': {message}")]
    Field { path: String, message: String },
}

fn field(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<String>,
    graph: Option<RawGraph>,
    source: Option<RawSource>,
    datum: Option<RawDatum>,
    solver: Option<RawSolver>,
    analysis: Option<RawAnalysis>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    spec: Option<String>,
    file: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: Option<String>,
    h0: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    nodes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatum {
    kind: Option<String>,
    value: Option<f64>,
    eps: Option<f64>,
    gamma: Option<f64>,
    y0: Option<usize>,
    vertex: Option<usize>,
    file: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    q: Option<f64>,
    horizon: Option<f64>,
    tol: Option<f64>,
    heat_tol: Option<f64>,
    blowup_threshold: Option<f64>,
    dt_min: Option<f64>,
    output_step: Option<f64>,
    nodes: Option<usize>,
    max_slab: Option<f64>,
    dump_times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    gamma: Option<f64>,
    y0: Option<usize>,
    lambda1: Option<f64>,
    exhaustion_radii: Option<Vec<u32>>,
    bound_cap: Option<f64>,
    kernel_times: Option<Vec<f64>>,
    samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    alpha: Option<Vec<f64>>,
    radii: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Generator(GraphSpec),
    File(PathBuf),
}

impl GraphSource {
    /// A generator spec, or a path when the text does not parse as one.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text.parse::<GraphSpec>() {
            Ok(spec) => Ok(GraphSource::Generator(spec)),
            Err(e) => {
                let p = PathBuf::from(text);
                if p.exists() {
                    Ok(GraphSource::File(p))
                } else {
                    Err(field("graph", format!("'{text}' is neither a generator spec ({e}) nor a file")))
                }
            }
        }
    }

    pub fn build(&self) -> Result<TruncatedDomain, graphheat_core::GraphError> {
        match self {
            GraphSource::Generator(s) => s.build(),
            GraphSource::File(p) => load_graph(p),
        }
    }

    pub fn family(&self) -> Option<&GraphSpec> {
        match self {
            GraphSource::Generator(s) => Some(s),
            GraphSource::File(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSource::Generator(s) => s.to_string(),
            GraphSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Constant(f64),
    /// `eps · p(·, y0, gamma)`; `y0 = None` means the domain origin.
    KernelMultiple { eps: f64, gamma: f64, y0: Option<usize> },
    /// `value` at one vertex, zero elsewhere.
    Point { vertex: Option<usize>, value: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub graph: GraphSource,
    pub source: SourceSpec,
    pub datum: DatumSpec,
    pub q: f64,
    pub horizon: f64,
    pub tol: f64,
    pub heat_tol: f64,
    pub blowup_threshold: f64,
    pub dt_min: f64,
    pub output_step: f64,
    pub nodes: usize,
    pub max_slab: f64,
    pub dump_times: Vec<f64>,
    pub gamma: f64,
    pub y0: Option<usize>,
    /// λ₁ supplied by the user instead of computed.
    pub lambda1: Option<f64>,
    /// Radii whose λ₁ values are extrapolated for the growth criterion.
    pub exhaustion_radii: Vec<u32>,
    pub bound_cap: f64,
    pub kernel_times: Vec<f64>,
    pub samples: usize,
    pub sweep_alpha: Option<Vec<f64>>,
    pub sweep_radii: Option<Vec<u32>>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            graph: GraphSource::Generator(GraphSpec::Cycle { n: 8 }),
            source: SourceSpec::Constant { h0: 1.0 },
            datum: DatumSpec::Constant(1.0),
            q: 2.0,
            horizon: 1.0,
            tol: graphheat_core::mild::DEFAULT_TOL,
            heat_tol: 1e-10,
            blowup_threshold: graphheat_core::mild::DEFAULT_BLOWUP_THRESHOLD,
            dt_min: graphheat_core::mild::DEFAULT_DT_MIN,
            output_step: 0.5,
            nodes: 8,
            max_slab: 0.5,
            dump_times: Vec::new(),
            gamma: 1.0,
            y0: None,
            lambda1: None,
            exhaustion_radii: (4..=12).collect(),
            bound_cap: 1000.0,
            kernel_times: vec![0.5, 1.0, 2.0],
            samples: 3,
            sweep_alpha: None,
            sweep_radii: None,
            seed: 0,
            output_dir: PathBuf::from("graphheat-out"),
        }
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field(path, format!("must be positive and finite, got {v}")))
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_with_base(&text, base)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_base(text, Path::new("."))
    }

    /// Parses TOML text; relative file paths resolve against `base`.
    pub fn parse_with_base(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        if let Some(seed) = raw.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = raw.output_dir {
            cfg.output_dir = resolve(base, &dir);
        }

        if let Some(g) = raw.graph {
            cfg.graph = match (g.spec, g.file) {
                (Some(_), Some(_)) => return Err(field("graph", "give either 'spec' or 'file', not both")),
                (Some(s), None) => GraphSource::Generator(
                    s.parse().map_err(|e: graphheat_core::GraphError| field("graph.spec", e.to_string()))?,
                ),
                (None, Some(f)) => {
                    let p = resolve(base, &f);
                    if !p.exists() {
                        return Err(field("graph.file", format!("{} does not exist", p.display())));
                    }
                    GraphSource::File(p)
                }
                (None, None) => return Err(field("graph", "needs 'spec' or 'file'")),
            };
        }

        if let Some(s) = raw.source {
            let kind = s.kind.as_deref().unwrap_or("constant");
            let need = |v: Option<f64>, key: &str| {
                v.ok_or_else(|| field(&format!("source.{key}"), format!("required for kind '{kind}'")))
            };
            let spec = match kind {
                "constant" => SourceSpec::constant(s.h0.unwrap_or(1.0)),
                "exponential" => SourceSpec::exponential(need(s.alpha, "alpha")?),
                "power" => SourceSpec::power(need(s.beta, "beta")?),
                "table" => SourceSpec::table(
                    s.nodes
                        .ok_or_else(|| field("source.nodes", "required for kind 'table'"))?
                        .into_iter()
                        .map(|[t, v]| (t, v))
                        .collect(),
                ),
                other => return Err(field("source.kind", format!("unknown kind '{other}'"))),
            };
            cfg.source = spec.map_err(|e| field("source", e.to_string()))?;
        }

        if let Some(d) = raw.datum {
            let kind = d.kind.as_deref().unwrap_or("constant");
            cfg.datum = match kind {
                "constant" => {
                    let v = d.value.unwrap_or(1.0);
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(field("datum.value", format!("must be finite and ≥ 0, got {v}")));
                    }
                    DatumSpec::Constant(v)
                }
                "kernel" => DatumSpec::KernelMultiple {
                    eps: positive("datum.eps", d.eps.unwrap_or(0.01))?,
                    gamma: positive("datum.gamma", d.gamma.unwrap_or(1.0))?,
                    y0: d.y0,
                },
                "point" => DatumSpec::Point {
                    vertex: d.vertex,
                    value: positive("datum.value", d.value.unwrap_or(1.0))?,
                },
                "file" => {
                    let f = d.file.ok_or_else(|| field("datum.file", "required for kind 'file'"))?;
                    let p = resolve(base, &f);
                    if !p.exists() {
                        return Err(field("datum.file", format!("{} does not exist", p.display())));
                    }
                    DatumSpec::File(p)
                }
                other => return Err(field("datum.kind", format!("unknown kind '{other}'"))),
            };
        }

        if let Some(s) = raw.solver {
            if let Some(q) = s.q {
                if !(q > 1.0 && q.is_finite()) {
                    return Err(field("solver.q", format!("must exceed 1, got {q}")));
                }
                cfg.q = q;
            }
            if let Some(v) = s.horizon {
                cfg.horizon = positive("solver.horizon", v)?;
            }
            if let Some(v) = s.tol {
                cfg.tol = positive("solver.tol", v)?;
                if cfg.tol >= 1.0 {
                    return Err(field("solver.tol", "must be below 1"));
                }
            }
            if let Some(v) = s.heat_tol {
                cfg.heat_tol = positive("solver.heat_tol", v)?;
                if cfg.heat_tol >= 1.0 {
                    return Err(field("solver.heat_tol", "must be below 1"));
                }
            }
            if let Some(v) = s.blowup_threshold {
                cfg.blowup_threshold = positive("solver.blowup_threshold", v)?;
            }
            if let Some(v) = s.dt_min {
                cfg.dt_min = positive("solver.dt_min", v)?;
            }
            if let Some(v) = s.output_step {
                cfg.output_step = positive("solver.output_step", v)?;
            }
            if let Some(v) = s.nodes {
                if v < 2 || v % 2 == 1 {
                    return Err(field("solver.nodes", format!("must be even and ≥ 2, got {v}")));
                }
                cfg.nodes = v;
            }
            if let Some(v) = s.max_slab {
                cfg.max_slab = positive("solver.max_slab", v)?;
            }
            if let Some(v) = s.dump_times {
                if v.iter().any(|t| !(*t >= 0.0)) {
                    return Err(field("solver.dump_times", "times must be ≥ 0"));
                }
                cfg.dump_times = v;
            }
        }

        if let Some(a) = raw.analysis {
            if let Some(v) = a.gamma {
                cfg.gamma = positive("analysis.gamma", v)?;
            }
            cfg.y0 = a.y0;
            if let Some(v) = a.lambda1 {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(field("analysis.lambda1", format!("must be finite and ≥ 0, got {v}")));
                }
                cfg.lambda1 = Some(v);
            }
            if let Some(r) = a.exhaustion_radii {
                if r.is_empty() || r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(field("analysis.exhaustion_radii", "must be nonempty and strictly increasing"));
                }
                cfg.exhaustion_radii = r;
            }
            if let Some(v) = a.bound_cap {
                cfg.bound_cap = positive("analysis.bound_cap", v)?;
            }
            if let Some(v) = a.kernel_times {
                if v.is_empty() || v.iter().any(|t| !(*t > 0.0)) {
                    return Err(field("analysis.kernel_times", "must be nonempty and positive"));
                }
                cfg.kernel_times = v;
            }
            if let Some(v) = a.samples {
                if v == 0 {
                    return Err(field("analysis.samples", "must be at least 1"));
                }
                cfg.samples = v;
            }
        }

        if let Some(s) = raw.sweep {
            if let Some(a) = s.alpha {
                if a.is_empty() {
                    return Err(field("sweep.alpha", "grid must be nonempty"));
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(field("sweep.alpha", "values must be finite"));
                }
                cfg.sweep_alpha = Some(a);
            }
            if let Some(r) = s.radii {
                if r.is_empty() {
                    return Err(field("sweep.radii", "grid must be nonempty"));
                }
                cfg.sweep_radii = Some(r);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ScenarioConfig::parse(
            r#"
            seed = 3
            [graph]
            spec = "tree:d=3,r=8,mu=unit"
            [source]
            kind = "exponential"
            alpha = 0.05
            [datum]
            kind = "kernel"
            eps = 0.01
            [solver]
            q = 2.0
            horizon = 100.0
            [sweep]
            alpha = [0.05, 0.3]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.source, SourceSpec::Exponential { alpha: 0.05 });
        assert_eq!(cfg.horizon, 100.0);
        assert_eq!(cfg.sweep_alpha, Some(vec![0.05, 0.3]));
        assert_eq!(cfg.tol, 1e-8);
    }

    #[test]
    fn errors_name_fields() {
        let e = ScenarioConfig::parse("[solver]\nq = 0.5\n").unwrap_err();
        assert_eq!(e, field("solver.q", "must exceed 1, got 0.5"));
        let e = ScenarioConfig::parse("[sweep]\nalpha = []\n").unwrap_err();
        assert!(matches!(e, ConfigError::Field { ref path, .. } if path == "sweep.alpha"));
        let e = ScenarioConfig::parse("[graph]\nfile = \"/nonexistent/g.txt\"\n").unwrap_err();
        assert!(matches!(e, ConfigError::Field { ref path, .. } if path == "graph.file"));
        let e = ScenarioConfig::parse("[source]\nkind = \"exponential\"\n").unwrap_err();
        assert!(matches!(e, ConfigError::Field { ref path, .. } if path == "source.alpha"));
        assert!(matches!(ScenarioConfig::parse("[solver]\nqq = 2\n"), Err(ConfigError::Parse(_))));
    }
}
