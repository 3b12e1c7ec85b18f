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

//! Turning a [`ScenarioConfig`] into core inputs.

use graphheat_core::mild::{Problem, SolveOptions};
use graphheat_core::source::SourceSpec;
use graphheat_core::spectral::Exhaustion;
use graphheat_core::{heat_kernel_column, lambda1, lambda1_exhaustion, TruncatedDomain};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, DatumSpec, ScenarioConfig};
use crate::CliError;

/// Eigensolver tolerance used by every subcommand.
pub const SPECTRAL_TOL: f64 = 1e-10;

pub fn build_domain(cfg: &ScenarioConfig) -> Result<TruncatedDomain, CliError> {
    Ok(cfg.graph.build()?)
}

fn vertex(domain: &TruncatedDomain, v: Option<usize>, path: &str) -> Result<usize, CliError> {
    let v = v.unwrap_or(domain.origin());
    if v >= domain.n() {
        return Err(ConfigError::Field {
            path: path.into(),
            message: format!("vertex {v} out of range for {} vertices", domain.n()),
        }
        .into());
    }
    Ok(v)
}

/// The anchor vertex `y₀` of kernel envelopes; the origin by default.
pub fn anchor(cfg: &ScenarioConfig, domain: &TruncatedDomain) -> Result<usize, CliError> {
    vertex(domain, cfg.y0, "analysis.y0")
}

pub fn build_datum(cfg: &ScenarioConfig, domain: &TruncatedDomain) -> Result<Vec<f64>, CliError> {
    let n = domain.n();
    match &cfg.datum {
        DatumSpec::Constant(c) => Ok(vec![*c; n]),
        DatumSpec::KernelMultiple { eps, gamma, y0 } => {
            let y = vertex(domain, *y0, "datum.y0")?;
            let col = heat_kernel_column(domain, y, &[*gamma], cfg.heat_tol)?;
            Ok(col.values[0].iter().map(|p| eps * p).collect())
        }
        DatumSpec::Point { vertex: v, value } => {
            let x = vertex(domain, *v, "datum.vertex")?;
            let mut u = vec![0.0; n];
            u[x] = *value;
            Ok(u)
        }
        DatumSpec::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let bad = |m: String| -> CliError {
                ConfigError::Field {
                    path: "datum.file".into(),
                    message: m,
                }
                .into()
            };
            let values: Vec<f64> = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| bad(format!("'{t}': {e}"))))
                .collect::<Result<_, _>>()?;
            if values.len() != n {
                return Err(bad(format!("{} values for {n} vertices", values.len())));
            }
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(bad("values must be finite and nonnegative".into()));
            }
            Ok(values)
        }
    }
}

pub fn problem<'a>(
    cfg: &ScenarioConfig,
    domain: &'a TruncatedDomain,
    source: SourceSpec,
    u0: Vec<f64>,
) -> Result<Problem<'a>, CliError> {
    let mut p = Problem::new(domain, cfg.q, source, u0, cfg.horizon)?;
    p.tol = cfg.tol;
    p.blowup_threshold = cfg.blowup_threshold;
    p.dt_min = cfg.dt_min;
    p.validate()?;
    Ok(p)
}

/// Uniform output grid plus any requested dump times inside the horizon.
pub fn solve_options(cfg: &ScenarioConfig) -> SolveOptions {
    let mut opts = SolveOptions::with_output_step(cfg.output_step, cfg.horizon);
    opts.nodes = cfg.nodes;
    opts.max_slab = cfg.max_slab;
    if let Some(times) = opts.output_times.as_mut() {
        times.extend(cfg.dump_times.iter().copied().filter(|&t| t <= cfg.horizon));
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    opts
}

/// `λ₁` of the truncated domain, or the configured override.
pub fn domain_lambda1(cfg: &ScenarioConfig, domain: &TruncatedDomain) -> Result<f64, CliError> {
    match cfg.lambda1 {
        Some(l) => Ok(l),
        None => Ok(lambda1(domain, SPECTRAL_TOL)?.lambda1),
    }
}

/// Exhaustion sequence for generator families that carry a radius.
pub fn exhaustion(cfg: &ScenarioConfig) -> Result<Option<Exhaustion>, CliError> {
    let Some(spec) = cfg.graph.family() else {
        return Ok(None);
    };
    if spec.with_radius(1).is_err() {
        return Ok(None);
    }
    Ok(Some(lambda1_exhaustion(spec, &cfg.exhaustion_radii, SPECTRAL_TOL)?))
}

/// `λ₁` of the whole graph: the override, else the extrapolated limit,
/// else the domain value.
pub fn graph_lambda1(cfg: &ScenarioConfig, domain: &TruncatedDomain) -> Result<f64, CliError> {
    if let Some(l) = cfg.lambda1 {
        return Ok(l);
    }
    match exhaustion(cfg)? {
        Some(ex) => Ok(ex.limit),
        None => domain_lambda1(cfg, domain),
    }
}

/// The origin followed by `k − 1` distinct vertices drawn with `seed`.
pub fn sample_vertices(domain: &TruncatedDomain, k: usize, seed: u64) -> Vec<usize> {
    let origin = domain.origin();
    let mut rest: Vec<usize> = (0..domain.n()).filter(|&v| v != origin).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest.shuffle(&mut rng);
    let mut out = vec![origin];
    out.extend(rest.into_iter().take(k.saturating_sub(1)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_seeded_and_distinct() {
        let cfg = ScenarioConfig::parse("[graph]\nspec = \"tree:d=3,r=4,mu=unit\"\n").unwrap();
        let d = build_domain(&cfg).unwrap();
        let a = sample_vertices(&d, 5, 11);
        assert_eq!(a, sample_vertices(&d, 5, 11));
        assert_eq!(a[0], d.origin());
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn dump_times_join_the_grid() {
        let mut cfg = ScenarioConfig::default();
        cfg.horizon = 1.0;
        cfg.output_step = 0.5;
        cfg.dump_times = vec![0.25, 0.5, 3.0];
        let t = solve_options(&cfg).output_times.unwrap();
        assert_eq!(t, vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn kernel_datum_scales_column() {
        let cfg = ScenarioConfig::parse(
            "[graph]\nspec = \"complete:n=2\"\n[datum]\nkind = \"kernel\"\neps = 2.0\ngamma = 0.5\n",
        )
        .unwrap();
        let d = build_domain(&cfg).unwrap();
        let u = build_datum(&cfg, &d).unwrap();
        let e = (-1.0f64).exp();
        assert!((u[0] - (1.0 + e)).abs() < 1e-8);
        assert!((u[1] - (1.0 - e)).abs() < 1e-8);
    }
}
