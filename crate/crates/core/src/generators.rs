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

//! Generators for the standard truncation families.
//!
//! Every generator assigns vertex ids deterministically, so regenerating with
//! the same parameters yields the same domain bit for bit.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::graph::{GraphError, TruncatedDomain, WeightedGraph};

/// Vertex measure used by the tree family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureMode {
    /// `μ ≡ 1`.
    Unit,
    /// `μ(x)` equal to the full-tree degree `d`.
    Degree,
}

/// Ball of radius `radius` around the root of the infinite `d`-regular tree.
///
/// Ids follow BFS from the root; children of a vertex get consecutive ids in
/// the order their parents were numbered.
pub fn gen_tree_ball(d: usize, radius: u32, mode: MeasureMode) -> Result<TruncatedDomain, GraphError> {
    if d < 3 {
        return Err(GraphError::InvalidParameter(format!(
            "tree branching degree must be at least 3, got {d}"
        )));
    }
    if radius < 1 {
        return Err(GraphError::InvalidParameter(
            "tree radius must be at least 1".into(),
        ));
    }
    let mut level = vec![0u32];
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    for r in 1..=radius {
        let mut next = Vec::with_capacity(frontier.len() * (d - 1));
        for &parent in &frontier {
            let children = if parent == 0 { d } else { d - 1 };
            for _ in 0..children {
                let id = level.len();
                level.push(r);
                edges.push((parent, id, 1.0));
                next.push(id);
            }
        }
        frontier = next;
    }
    let n = level.len();
    let mu_value = match mode {
        MeasureMode::Unit => 1.0,
        MeasureMode::Degree => d as f64,
    };
    let kill = level
        .iter()
        .map(|&l| if l == radius { (d - 1) as f64 } else { 0.0 })
        .collect();
    let graph = WeightedGraph::new(n, vec![mu_value; n], &edges)?;
    TruncatedDomain::new(graph, kill, 0, radius)
}

/// Box `[−R, R]^dim` of the integer lattice with nearest-neighbour unit
/// weights. The origin gets id 0 and ids follow BFS with neighbours visited
/// in the order −e₁, +e₁, −e₂, +e₂.
pub fn gen_lattice_box(dim: usize, radius: u32) -> Result<TruncatedDomain, GraphError> {
    if !(dim == 1 || dim == 2) {
        return Err(GraphError::InvalidParameter(format!(
            "lattice dimension must be 1 or 2, got {dim}"
        )));
    }
    if radius < 1 {
        return Err(GraphError::InvalidParameter(
            "lattice radius must be at least 1".into(),
        ));
    }
    let r = radius as i64;
    let inside = |p: &[i64; 2]| p.iter().take(dim).all(|c| c.abs() <= r);
    let steps: Vec<[i64; 2]> = if dim == 1 {
        vec![[-1, 0], [1, 0]]
    } else {
        vec![[-1, 0], [1, 0], [0, -1], [0, 1]]
    };

    let mut ids: HashMap<[i64; 2], usize> = HashMap::new();
    let mut coords = vec![[0i64, 0]];
    ids.insert([0, 0], 0);
    let mut queue = VecDeque::from([[0i64, 0]]);
    let mut edges = Vec::new();
    let mut kill = Vec::new();
    while let Some(p) = queue.pop_front() {
        let id = ids[&p];
        let mut k = 0.0;
        for s in &steps {
            let q = [p[0] + s[0], p[1] + s[1]];
            if !inside(&q) {
                k += 1.0;
                continue;
            }
            let qid = match ids.get(&q) {
                Some(&qid) => qid,
                None => {
                    let qid = coords.len();
                    ids.insert(q, qid);
                    coords.push(q);
                    queue.push_back(q);
                    qid
                }
            };
            if id < qid {
                edges.push((id, qid, 1.0));
            }
        }
        kill.push((id, k));
    }
    let n = coords.len();
    let mut kill_vec = vec![0.0; n];
    for (id, k) in kill {
        kill_vec[id] = k;
    }
    let graph = WeightedGraph::new(n, vec![1.0; n], &edges)?;
    TruncatedDomain::new(graph, kill_vec, 0, radius)
}

/// The `n`-cycle with unit weights and measure, no killing.
pub fn gen_cycle(n: usize) -> Result<TruncatedDomain, GraphError> {
    if n < 3 {
        return Err(GraphError::InvalidParameter(format!(
            "cycle length must be at least 3, got {n}"
        )));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    let graph = WeightedGraph::new(n, vec![1.0; n], &edges)?;
    TruncatedDomain::new(graph, vec![0.0; n], 0, (n / 2) as u32)
}

/// Complete graph `K_n` with unit weights and measure, no killing.
pub fn gen_complete(n: usize) -> Result<TruncatedDomain, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!(
            "complete graph needs at least 2 vertices, got {n}"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, 1.0));
        }
    }
    let graph = WeightedGraph::new(n, vec![1.0; n], &edges)?;
    TruncatedDomain::new(graph, vec![0.0; n], 0, 1)
}

/// Textual generator description, e.g. `tree:d=3,r=8,mu=unit`,
/// `lattice:dim=1,r=50`, `cycle:n=8`, `complete:n=2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GraphSpec {
    Tree { d: usize, radius: u32, mu: MeasureMode },
    Lattice { dim: usize, radius: u32 },
    Cycle { n: usize },
    Complete { n: usize },
}

impl GraphSpec {
    pub fn build(&self) -> Result<TruncatedDomain, GraphError> {
        match *self {
            GraphSpec::Tree { d, radius, mu } => gen_tree_ball(d, radius, mu),
            GraphSpec::Lattice { dim, radius } => gen_lattice_box(dim, radius),
            GraphSpec::Cycle { n } => gen_cycle(n),
            GraphSpec::Complete { n } => gen_complete(n),
        }
    }

    /// The same family at another truncation radius. Families without a
    /// radius (cycles, complete graphs) are rejected.
    pub fn with_radius(&self, radius: u32) -> Result<GraphSpec, GraphError> {
        match *self {
            GraphSpec::Tree { d, mu, .. } => Ok(GraphSpec::Tree { d, radius, mu }),
            GraphSpec::Lattice { dim, .. } => Ok(GraphSpec::Lattice { dim, radius }),
            _ => Err(GraphError::InvalidParameter(format!(
                "family '{self}' has no truncation radius"
            ))),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Tree { d, radius, mu } => {
                let mu = match mu {
                    MeasureMode::Unit => "unit",
                    MeasureMode::Degree => "degree",
                };
                write!(f, "tree:d={d},r={radius},mu={mu}")
            }
            GraphSpec::Lattice { dim, radius } => write!(f, "lattice:dim={dim},r={radius}"),
            GraphSpec::Cycle { n } => write!(f, "cycle:n={n}"),
            GraphSpec::Complete { n } => write!(f, "complete:n={n}"),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| GraphError::InvalidParameter(msg);
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = HashMap::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value in '{part}'")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let int = |key: &str| -> Result<u64, GraphError> {
            kv.get(key)
                .ok_or_else(|| bad(format!("generator '{kind}' needs '{key}'")))?
                .parse::<u64>()
                .map_err(|e| bad(format!("'{key}': {e}")))
        };
        match kind.trim() {
            "tree" => {
                let mu = match kv.get("mu").map(String::as_str) {
                    None | Some("unit") => MeasureMode::Unit,
                    Some("degree") => MeasureMode::Degree,
                    Some(other) => return Err(bad(format!("unknown measure mode '{other}'"))),
                };
                Ok(GraphSpec::Tree {
                    d: int("d")? as usize,
                    radius: int("r")? as u32,
                    mu,
                })
            }
            "lattice" => Ok(GraphSpec::Lattice {
                dim: int("dim")? as usize,
                radius: int("r")? as u32,
            }),
            "cycle" => Ok(GraphSpec::Cycle {
                n: int("n")? as usize,
            }),
            "complete" => Ok(GraphSpec::Complete {
                n: int("n")? as usize,
            }),
            other => Err(bad(format!("unknown generator '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_count(d: usize, r: u32) -> usize {
        1 + d * ((d - 1).pow(r) - 1) / (d - 2)
    }

    #[test]
    fn tree_ball_counts() {
        let t1 = gen_tree_ball(3, 1, MeasureMode::Unit).unwrap();
        assert_eq!(t1.n(), 4);
        assert_eq!(t1.kill(), &[0.0, 2.0, 2.0, 2.0]);
        assert_eq!(gen_tree_ball(3, 2, MeasureMode::Unit).unwrap().n(), 10);
        let t8 = gen_tree_ball(3, 8, MeasureMode::Unit).unwrap();
        assert_eq!(t8.n(), 766);
        assert_eq!(t8.n(), 1 + 3 * ((1 << 8) - 1));
        for d in 3..6 {
            for r in 1..5 {
                assert_eq!(gen_tree_ball(d, r, MeasureMode::Unit).unwrap().n(), tree_count(d, r));
            }
        }
    }

    #[test]
    fn tree_kill_on_sphere_only() {
        let t = gen_tree_ball(4, 3, MeasureMode::Degree).unwrap();
        let dist = t.graph().distances_from(0);
        for x in 0..t.n() {
            assert_eq!(t.kill()[x] > 0.0, dist[x] == 3);
            assert_eq!(t.mu()[x], 4.0);
            // full-tree degree is d everywhere
            assert_eq!(t.graph().degree(x) + t.kill()[x], 4.0);
        }
    }

    #[test]
    fn tree_ids_are_bfs_ordered() {
        let t = gen_tree_ball(3, 4, MeasureMode::Unit).unwrap();
        assert_eq!(t.graph().bfs_order(0), (0..t.n()).collect::<Vec<_>>());
        let dist = t.graph().distances_from(0);
        assert!(dist.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lattice_boxes() {
        let p = gen_lattice_box(1, 2).unwrap();
        assert_eq!(p.n(), 5);
        let ends: Vec<_> = (0..5).filter(|&x| p.kill()[x] == 1.0).collect();
        assert_eq!(ends.len(), 2);
        assert_eq!(p.origin(), 0);

        let sq = gen_lattice_box(2, 1).unwrap();
        assert_eq!(sq.n(), 9);
        let corners = (0..9).filter(|&x| sq.kill()[x] == 2.0).count();
        let sides = (0..9).filter(|&x| sq.kill()[x] == 1.0).count();
        assert_eq!((corners, sides), (4, 4));
        assert_eq!(sq.kill()[0], 0.0);

        let long = gen_lattice_box(1, 100).unwrap();
        assert_eq!(long.n(), 201);
        assert_eq!(long.kill().iter().filter(|&&k| k == 0.0).count(), 199);
    }

    #[test]
    fn cycles() {
        let c3 = gen_cycle(3).unwrap();
        assert!((0..3).all(|x| c3.graph().degree(x) == 2.0));
        assert!(gen_cycle(8).unwrap().is_kill_free());
        let c4 = gen_cycle(4).unwrap();
        let mut row = vec![0.0; 4];
        let mut e0 = vec![0.0; 4];
        // row 0 of the Laplacian matrix: apply to unit vectors
        for (y, slot) in row.iter_mut().enumerate() {
            e0.iter_mut().for_each(|v| *v = 0.0);
            e0[y] = 1.0;
            let mut out = vec![0.0; 4];
            c4.laplacian_into(&e0, &mut out);
            *slot = out[0];
        }
        assert_eq!(row, vec![-2.0, 1.0, 0.0, 1.0]);
        assert!(gen_cycle(2).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_lattice_box(2, 5).unwrap(), gen_lattice_box(2, 5).unwrap());
        assert_eq!(
            gen_tree_ball(3, 6, MeasureMode::Unit).unwrap(),
            gen_tree_ball(3, 6, MeasureMode::Unit).unwrap()
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_tree_ball(2, 3, MeasureMode::Unit).is_err());
        assert!(gen_tree_ball(3, 0, MeasureMode::Unit).is_err());
        assert!(gen_lattice_box(3, 2).is_err());
        assert!(gen_lattice_box(1, 0).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["tree:d=3,r=8,mu=unit", "lattice:dim=2,r=4", "cycle:n=8", "complete:n=2"] {
            let spec: GraphSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("tree:d=3".parse::<GraphSpec>().is_err());
        assert!("blob:n=3".parse::<GraphSpec>().is_err());
        let t: GraphSpec = "tree:d=3,r=2".parse().unwrap();
        assert_eq!(t.with_radius(5).unwrap().build().unwrap().n(), 94);
        assert!(GraphSpec::Cycle { n: 5 }.with_radius(3).is_err());
    }
}
