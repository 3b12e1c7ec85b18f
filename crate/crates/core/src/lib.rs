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

//! Heat semigroup, spectral bottom and the semilinear equation
//! `u_t = Δu + h(t) u^q` on truncated weighted graphs.

pub mod graph;
pub mod blowup;
pub mod generators;
pub mod heat;
pub mod io;
pub mod ode;
pub mod mild;
pub mod source;
pub mod spectral;

pub use generators::{gen_complete, gen_cycle, gen_lattice_box, gen_tree_ball, GraphSpec, MeasureMode};
pub use graph::{build_graph, Edge, GraphError, TruncatedDomain, WeightedGraph};
pub use heat::{
    heat_apply, heat_kernel_column, kernel_decay_rate, validate_kernel, HeatError,
    HeatPropagator, KernelCache, KernelColumn, KernelReport,
};
pub use io::{load_graph, parse_domain, save_graph};
pub use spectral::{apply_laplacian, lambda1, lambda1_exhaustion, SpectralError, SpectralEstimate};
