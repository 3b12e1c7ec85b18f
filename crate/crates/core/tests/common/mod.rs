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

use graphheat_core::{TruncatedDomain, WeightedGraph};
use proptest::prelude::*;

/// Connected weighted domain on 2..=max_n vertices: a random spanning tree
/// plus extra edges, random measure and optional killing.
pub fn domain(max_n: usize, with_kill: bool) -> impl Strategy<Value = TruncatedDomain> {
    (2..=max_n)
        .prop_flat_map(move |n| {
            (
                Just(n),
                proptest::collection::vec((0.0f64..1.0, 0.1f64..2.0), n - 1),
                proptest::collection::vec((0..n, 0..n, 0.1f64..2.0), 0..n),
                proptest::collection::vec(0.5f64..2.0, n),
                proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.5], n),
            )
        })
        .prop_map(move |(n, tree, extra, mu, kill)| {
            let mut edges: Vec<(usize, usize, f64)> = tree
                .iter()
                .enumerate()
                .map(|(k, &(u, w))| {
                    let child = k + 1;
                    let parent = ((u * child as f64) as usize).min(child - 1);
                    (parent, child, w)
                })
                .collect();
            for (a, b, w) in extra {
                let key = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(i, j, _)| (i.min(j), i.max(j)) == key) {
                    edges.push((a, b, w));
                }
            }
            let graph = WeightedGraph::new(n, mu, &edges).expect("valid random graph");
            let kill = if with_kill { kill } else { vec![0.0; n] };
            TruncatedDomain::new(graph, kill, 0, 1).expect("valid random domain")
        })
}

/// Field of length `n` with entries in `[-1, 1]`.
pub fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}
