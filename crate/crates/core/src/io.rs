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

//! Line-oriented text format for truncated domains.
//!
//! ```text
//! # comment
//! v <id> <mu>
//! e <i> <j> <omega>
//! k <id> <kill>        (optional, default 0)
//! o <origin-id>        (optional, default 0)
//! r <radius>           (optional, default 0)
//! ```
//!
//! Reals are written with Rust's shortest round-trip formatting, so a save
//! followed by a load reproduces every weight bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::graph::{GraphError, TruncatedDomain, WeightedGraph};

fn parse_err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        message: message.into(),
    }
}

fn at_line(line: usize, e: GraphError) -> GraphError {
    GraphError::AtLine {
        line,
        source: Box::new(e),
    }
}

/// Parses the text format.
pub fn parse_domain(text: &str) -> Result<TruncatedDomain, GraphError> {
    let mut mu: Vec<Option<(f64, usize)>> = Vec::new();
    let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut kills: Vec<(usize, f64, usize)> = Vec::new();
    let mut origin: Option<(usize, usize)> = None;
    let mut radius = 0u32;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let id = |s: &str| -> Result<usize, GraphError> {
            s.parse::<usize>()
                .map_err(|e| parse_err(line, format!("bad vertex id '{s}': {e}")))
        };
        let real = |s: &str| -> Result<f64, GraphError> {
            s.parse::<f64>()
                .map_err(|e| parse_err(line, format!("bad number '{s}': {e}")))
        };
        let arity = |k: usize| -> Result<(), GraphError> {
            if fields.len() == k + 1 {
                Ok(())
            } else {
                Err(parse_err(
                    line,
                    format!("record '{}' takes {k} fields, got {}", fields[0], fields.len() - 1),
                ))
            }
        };
        match fields[0] {
            "v" => {
                arity(2)?;
                let v = id(fields[1])?;
                let m = real(fields[2])?;
                if mu.len() <= v {
                    mu.resize(v + 1, None);
                }
                if mu[v].is_some() {
                    return Err(parse_err(line, format!("vertex {v} declared twice")));
                }
                if !(m > 0.0 && m.is_finite()) {
                    return Err(at_line(line, GraphError::NonPositiveMeasure { vertex: v, mu: m }));
                }
                mu[v] = Some((m, line));
            }
            "e" => {
                arity(3)?;
                let (i, j, w) = (id(fields[1])?, id(fields[2])?, real(fields[3])?);
                if i == j {
                    return Err(at_line(line, GraphError::SelfLoop { vertex: i }));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(at_line(
                        line,
                        GraphError::NonPositiveWeight {
                            i: i.min(j),
                            j: i.max(j),
                            omega: w,
                        },
                    ));
                }
                edges.push((i, j, w, line));
            }
            "k" => {
                arity(2)?;
                kills.push((id(fields[1])?, real(fields[2])?, line));
            }
            "o" => {
                arity(1)?;
                origin = Some((id(fields[1])?, line));
            }
            "r" => {
                arity(1)?;
                radius = fields[1]
                    .parse()
                    .map_err(|e| parse_err(line, format!("bad radius: {e}")))?;
            }
            other => return Err(parse_err(line, format!("unknown record type '{other}'"))),
        }
    }

    let n = mu.len();
    let mut measure = Vec::with_capacity(n);
    for (v, m) in mu.iter().enumerate() {
        match m {
            Some((m, _)) => measure.push(*m),
            None => {
                return Err(parse_err(
                    text.lines().count(),
                    format!("vertex ids must be dense 0..{}: id {v} missing", n.saturating_sub(1)),
                ))
            }
        }
    }
    for &(i, j, _, line) in &edges {
        for v in [i, j] {
            if v >= n {
                return Err(at_line(line, GraphError::VertexOutOfRange { vertex: v, n }));
            }
        }
    }
    // Report a conflicting duplicate at the line of its second occurrence.
    let mut seen = std::collections::HashMap::new();
    for &(i, j, w, line) in &edges {
        let key = (i.min(j), i.max(j));
        if let Some(&first) = seen.get(&key) {
            let first: f64 = first;
            if first.to_bits() != w.to_bits() {
                return Err(at_line(
                    line,
                    GraphError::DuplicateEdgeConflict {
                        i: key.0,
                        j: key.1,
                        first,
                        second: w,
                    },
                ));
            }
        } else {
            seen.insert(key, w);
        }
    }

    let edge_list: Vec<_> = edges.iter().map(|&(i, j, w, _)| (i, j, w)).collect();
    let graph = WeightedGraph::new(n, measure, &edge_list)?;

    let mut kill = vec![0.0; n];
    for (v, k, line) in kills {
        if v >= n {
            return Err(at_line(line, GraphError::VertexOutOfRange { vertex: v, n }));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(at_line(line, GraphError::InvalidKill { vertex: v, kill: k }));
        }
        kill[v] = k;
    }
    let origin = match origin {
        Some((o, line)) if o >= n => {
            return Err(at_line(line, GraphError::VertexOutOfRange { vertex: o, n }))
        }
        Some((o, _)) => o,
        None => 0,
    };
    TruncatedDomain::new(graph, kill, origin, radius)
}

/// Serializes a domain to the text format.
pub fn format_domain(domain: &TruncatedDomain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# graphheat domain: {} vertices", domain.n());
    let _ = writeln!(out, "o {}", domain.origin());
    let _ = writeln!(out, "r {}", domain.radius());
    for (v, m) in domain.mu().iter().enumerate() {
        let _ = writeln!(out, "v {v} {m:?}");
    }
    for e in domain.graph().edges() {
        let _ = writeln!(out, "e {} {} {:?}", e.i, e.j, e.omega);
    }
    for (v, k) in domain.kill().iter().enumerate() {
        if *k != 0.0 {
            let _ = writeln!(out, "k {v} {k:?}");
        }
    }
    out
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<TruncatedDomain, GraphError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| GraphError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_domain(&text)
}

pub fn save_graph(domain: &TruncatedDomain, path: impl AsRef<Path>) -> Result<(), GraphError> {
    std::fs::write(path.as_ref(), format_domain(domain))
        .map_err(|e| GraphError::Io(format!("{}: {e}", path.as_ref().display())))
}
