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

//! Weighted graphs `(G, ω, μ)` and Dirichlet truncations of infinite graphs.
//!
//! A [`WeightedGraph`] is validated once at construction and is immutable
//! afterwards: symmetric positive edge weights stored once per unordered pair,
//! no self-loops, positive vertex measure, connected. A [`TruncatedDomain`]
//! adds a per-vertex killing weight that records how much edge weight leaks
//! to the removed exterior of a ball in a larger graph.

use std::collections::{BTreeMap, VecDeque};
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Rejections raised while building or loading a graph.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("self-loop at vertex {vertex}: axiom ω(x,x) = 0 violated")]
    SelfLoop { vertex: usize },
    #[error("edge ({i}, {j}) has non-positive weight {omega}")]
    NonPositiveWeight { i: usize, j: usize, omega: f64 },
    #[error("vertex {vertex} has non-positive measure {mu}")]
    NonPositiveMeasure { vertex: usize, mu: f64 },
    #[error("graph is disconnected: {unreached} vertices unreachable from vertex 0")]
    Disconnected { unreached: usize },
    #[error("edge ({i}, {j}) listed twice with conflicting weights {first} and {second}")]
    DuplicateEdgeConflict {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },
    #[error("vertex id {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("killing weight at vertex {vertex} is negative or not finite: {kill}")]
    InvalidKill { vertex: usize, kill: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<GraphError>,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl GraphError {
    /// The underlying axiom violation, looking through line annotations.
    pub fn root(&self) -> &GraphError {
        match self {
            GraphError::AtLine { source, .. } => source.root(),
            other => other,
        }
    }
}

/// One undirected edge, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub omega: f64,
}

/// Finite, connected, locally finite weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    mu: Vec<f64>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
    degree: Vec<f64>,
}

impl WeightedGraph {
    /// Validates the axioms and builds the adjacency structure.
    ///
    /// Edges may be listed in either orientation. A pair listed twice with the
    /// same weight is collapsed; a pair listed with two different weights is
    /// rejected since ω must be a single symmetric function.
    pub fn new(n: usize, mu: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidParameter(format!(
                "a graph needs at least 2 vertices, got {n}"
            )));
        }
        if mu.len() != n {
            return Err(GraphError::InvalidParameter(format!(
                "measure list has {} entries for {n} vertices",
                mu.len()
            )));
        }
        for (vertex, &m) in mu.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(GraphError::NonPositiveMeasure { vertex, mu: m });
            }
        }

        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, omega) in edges {
            check_edge(n, a, b, omega)?;
            let key = (a.min(b), a.max(b));
            match unique.get(&key) {
                Some(&first) if first.to_bits() != omega.to_bits() => {
                    return Err(GraphError::DuplicateEdgeConflict {
                        i: key.0,
                        j: key.1,
                        first,
                        second: omega,
                    })
                }
                Some(_) => {}
                None => {
                    unique.insert(key, omega);
                }
            }
        }

        let edges: Vec<Edge> = unique
            .into_iter()
            .map(|((i, j), omega)| Edge { i, j, omega })
            .collect();

        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in &edges {
            buckets[e.i].push((e.j, e.omega));
            buckets[e.j].push((e.i, e.omega));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(2 * edges.len());
        let mut degree = Vec::with_capacity(n);
        offsets.push(0);
        for mut b in buckets {
            b.sort_by_key(|&(y, _)| y);
            degree.push(b.iter().map(|&(_, w)| w).sum());
            neighbors.extend(b);
            offsets.push(neighbors.len());
        }

        let graph = WeightedGraph {
            mu,
            edges,
            offsets,
            neighbors,
            degree,
        };
        let unreached = n - graph.bfs_order(0).len();
        if unreached > 0 {
            return Err(GraphError::Disconnected { unreached });
        }
        Ok(graph)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted `(neighbor, ω)` pairs of vertex `x`.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Weighted degree `Σ_y ω(x,y)`.
    pub fn degree(&self, x: usize) -> f64 {
        self.degree[x]
    }

    /// `ω(x,y)`, zero when the vertices are not adjacent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        let nb = self.neighbors(x);
        nb.binary_search_by_key(&y, |&(z, _)| z)
            .map(|k| nb[k].1)
            .unwrap_or(0.0)
    }

    /// Vertices in breadth-first order from `root`.
    pub fn bfs_order(&self, root: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n()];
        let mut order = Vec::with_capacity(self.n());
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(y, _) in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        order
    }

    /// Graph distance (hop count) from `root` to every vertex.
    pub fn distances_from(&self, root: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::from([root]);
        dist[root] = 0;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in self.neighbors(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

fn check_edge(n: usize, a: usize, b: usize, omega: f64) -> Result<(), GraphError> {
    for v in [a, b] {
        if v >= n {
            return Err(GraphError::VertexOutOfRange { vertex: v, n });
        }
    }
    if a == b {
        return Err(GraphError::SelfLoop { vertex: a });
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(GraphError::NonPositiveWeight {
            i: a.min(b),
            j: a.max(b),
            omega,
        });
    }
    Ok(())
}

/// Validating constructor for a bare graph.
pub fn build_graph(
    n: usize,
    mu: &[f64],
    edges: &[(usize, usize, f64)],
) -> Result<WeightedGraph, GraphError> {
    WeightedGraph::new(n, mu.to_vec(), edges)
}

/// A ball of a larger graph with Dirichlet (killing) boundary.
///
/// `kill(x) = Σ_{y outside} ω(x,y)`. With zero extension outside the ball the
/// Laplacian of the full graph restricted to the ball is
/// `Δf(x) = (1/μ(x)) [Σ_{y inside} ω(x,y)(f(y) − f(x)) − kill(x) f(x)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDomain {
    graph: WeightedGraph,
    kill: Vec<f64>,
    origin: usize,
    radius: u32,
}

impl TruncatedDomain {
    pub fn new(
        graph: WeightedGraph,
        kill: Vec<f64>,
        origin: usize,
        radius: u32,
    ) -> Result<Self, GraphError> {
        let n = graph.n();
        if kill.len() != n {
            return Err(GraphError::InvalidParameter(format!(
                "kill list has {} entries for {n} vertices",
                kill.len()
            )));
        }
        for (vertex, &k) in kill.iter().enumerate() {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(GraphError::InvalidKill { vertex, kill: k });
            }
        }
        if origin >= n {
            return Err(GraphError::VertexOutOfRange { vertex: origin, n });
        }
        Ok(TruncatedDomain {
            graph,
            kill,
            origin,
            radius,
        })
    }

    /// A finite graph taken as the whole space (no killing).
    pub fn whole(graph: WeightedGraph, origin: usize) -> Result<Self, GraphError> {
        let n = graph.n();
        let radius = graph
            .distances_from(origin.min(n - 1))
            .into_iter()
            .max()
            .unwrap_or(0) as u32;
        TruncatedDomain::new(graph, vec![0.0; n], origin, radius)
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn mu(&self) -> &[f64] {
        self.graph.mu()
    }

    pub fn kill(&self) -> &[f64] {
        &self.kill
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn is_kill_free(&self) -> bool {
        self.kill.iter().all(|&k| k == 0.0)
    }

    /// `out ← Δf`. Sums run over the sorted adjacency so results are
    /// reproducible bit for bit.
    pub fn laplacian_into(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.graph;
        for x in 0..g.n() {
            let fx = f[x];
            let mut acc = 0.0;
            for &(y, w) in g.neighbors(x) {
                acc += w * (f[y] - fx);
            }
            out[x] = (acc - self.kill[x] * fx) / g.mu[x];
        }
    }

    /// Gershgorin bound on the spectral radius of `−Δ`.
    pub fn operator_norm_bound(&self) -> f64 {
        (0..self.n())
            .map(|x| (2.0 * self.graph.degree(x) + self.kill[x]) / self.graph.mu[x])
            .fold(0.0, f64::max)
    }

    /// `⟨f, g⟩_μ = Σ f g μ`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(self.mu())
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// `Σ f μ`.
    pub fn mass(&self, f: &[f64]) -> f64 {
        f.iter().zip(self.mu()).map(|(a, m)| a * m).sum()
    }

    /// Stable content hash, used to key kernel caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n().hash(&mut h);
        for m in self.mu() {
            m.to_bits().hash(&mut h);
        }
        for e in self.graph.edges() {
            (e.i, e.j, e.omega.to_bits()).hash(&mut h);
        }
        for k in &self.kill {
            k.to_bits().hash(&mut h);
        }
        (self.origin, self.radius).hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_is_valid() {
        let g = build_graph(2, &[1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.degree(0), 1.0);
    }

    #[test]
    fn axiom_violations_are_named() {
        assert_eq!(
            build_graph(2, &[1.0, 1.0], &[(0, 0, 1.0)]).unwrap_err(),
            GraphError::SelfLoop { vertex: 0 }
        );
        assert_eq!(
            build_graph(3, &[1.0, 1.0, 1.0], &[(0, 1, 1.0)]).unwrap_err(),
            GraphError::Disconnected { unreached: 1 }
        );
        assert!(matches!(
            build_graph(2, &[1.0, 1.0], &[(0, 1, 0.0)]).unwrap_err(),
            GraphError::NonPositiveWeight { .. }
        ));
        assert!(matches!(
            build_graph(2, &[1.0, -1.0], &[(0, 1, 1.0)]).unwrap_err(),
            GraphError::NonPositiveMeasure { vertex: 1, .. }
        ));
        assert!(matches!(
            build_graph(2, &[1.0, 1.0], &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err(),
            GraphError::DuplicateEdgeConflict { i: 0, j: 1, .. }
        ));
        assert!(matches!(
            build_graph(1, &[1.0], &[]).unwrap_err(),
            GraphError::InvalidParameter(_)
        ));
    }

    #[test]
    fn consistent_duplicates_collapse() {
        let g = build_graph(2, &[1.0, 1.0], &[(0, 1, 1.5), (1, 0, 1.5)]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.degree(1), 1.5);
    }

    #[test]
    fn laplacian_with_kill_matches_definition() {
        let g = build_graph(2, &[2.0, 1.0], &[(0, 1, 3.0)]).unwrap();
        let d = TruncatedDomain::new(g, vec![1.0, 0.0], 0, 1).unwrap();
        let mut out = [0.0; 2];
        d.laplacian_into(&[1.0, 0.0], &mut out);
        // (3·(0−1) − 1·1)/2 and 3·(1−0)/1
        assert_eq!(out, [-2.0, 3.0]);
        assert_eq!(d.operator_norm_bound(), 6.0);
    }

    #[test]
    fn negative_kill_rejected() {
        let g = build_graph(2, &[1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            TruncatedDomain::new(g, vec![0.0, -1.0], 0, 1).unwrap_err(),
            GraphError::InvalidKill { vertex: 1, .. }
        ));
    }
}
