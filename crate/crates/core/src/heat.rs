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

//! Heat semigroup `e^{tΔ}` and heat kernel `p(x, y, t)` on a truncated domain.
//!
//! `(e^{tΔ}u)(x) = Σ_y p(x,y,t) u(y) μ(y)`, so the kernel column at `y` is
//! the semigroup applied to `δ_y / μ(y)`.
//!
//! Propagation is explicit Dormand–Prince with the step capped inside the
//! stability interval (`h ρ ≤ 0.9·3.3`, `ρ` the Gershgorin bound of `−Δ`).
//! When `t ρ` is so large that explicit stepping would need too many steps
//! the propagator switches to an L-stable two-stage SDIRK scheme whose
//! linear systems `(I − cΔ)x = b` are solved by conjugate gradients in the
//! `μ`-inner product.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::graph::TruncatedDomain;
use crate::ode::{integrate, sup, IntegrationStats, OdeError, StepControl, DORMAND_PRINCE_54};
use crate::spectral::{lambda1, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatError {
    #[error("heat integration failed: {0}")]
    IntegrationFailure(#[from] OdeError),
    #[error("field has {got} entries, domain has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel underflows at t = {t}")]
    UnderflowWindow { t: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Explicit steps above which [`Scheme::Auto`] switches to SDIRK.
const EXPLICIT_STEP_LIMIT: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Auto,
    Explicit,
    Implicit,
}

/// Reusable `e^{tΔ}` on one domain.
#[derive(Debug, Clone)]
pub struct HeatPropagator<'a> {
    domain: &'a TruncatedDomain,
    tol: f64,
    rho: f64,
    scheme: Scheme,
    min_steps: usize,
}

impl<'a> HeatPropagator<'a> {
    pub fn new(domain: &'a TruncatedDomain, tol: f64) -> Result<Self, HeatError> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(HeatError::InvalidInput(format!(
                "tolerance must lie in (0, 1), got {tol}"
            )));
        }
        Ok(HeatPropagator {
            domain,
            tol,
            rho: domain.operator_norm_bound(),
            scheme: Scheme::Auto,
            min_steps: 1,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Forces enough explicit steps that a point mass reaches every vertex
    /// within graph distance `reach`, so kernels come out strictly positive
    /// there instead of exactly zero.
    pub fn with_reach(mut self, reach: usize) -> Self {
        self.min_steps = reach.div_ceil(DORMAND_PRINCE_54.degree).max(1);
        self
    }

    pub fn domain(&self) -> &'a TruncatedDomain {
        self.domain
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn implicit_for(&self, t: f64) -> bool {
        match self.scheme {
            Scheme::Explicit => false,
            Scheme::Implicit => true,
            Scheme::Auto => {
                t * self.rho / (0.9 * DORMAND_PRINCE_54.stability_radius) > EXPLICIT_STEP_LIMIT
            }
        }
    }

    /// `u ← e^{tΔ} u`.
    pub fn propagate(&self, u: &mut [f64], t: f64) -> Result<IntegrationStats, HeatError> {
        let n = self.domain.n();
        if u.len() != n {
            return Err(HeatError::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(HeatError::InvalidInput(format!("time must be finite and ≥ 0, got {t}")));
        }
        if t == 0.0 || u.iter().all(|&v| v == 0.0) {
            return Ok(IntegrationStats::default());
        }
        if self.implicit_for(t) {
            return self.propagate_sdirk(u, t);
        }
        let mut ctl = StepControl::new(self.tol);
        ctl.h_max = 0.9 * DORMAND_PRINCE_54.stability_radius / self.rho.max(f64::MIN_POSITIVE);
        ctl.min_steps = self.min_steps;
        let domain = self.domain;
        let stats = integrate(
            &DORMAND_PRINCE_54,
            |_t, y, dy| domain.laplacian_into(y, dy),
            0.0,
            t,
            u,
            &ctl,
            None,
        )?;
        Ok(stats)
    }

    fn propagate_sdirk(&self, u: &mut [f64], t: f64) -> Result<IntegrationStats, HeatError> {
        let mut stats = IntegrationStats::default();
        let n = u.len();
        let mut full = vec![0.0; n];
        let mut half = vec![0.0; n];
        let mut h = (t / 16.0).min(1.0 / self.rho.max(1e-300) * 10.0);
        let mut s = 0.0;
        while s < t {
            let last = s + h >= t * (1.0 - 1e-14);
            let step = if last { t - s } else { h };
            full.copy_from_slice(u);
            self.sdirk_step(&mut full, step)?;
            half.copy_from_slice(u);
            self.sdirk_step(&mut half, 0.5 * step)?;
            self.sdirk_step(&mut half, 0.5 * step)?;
            let diff = full.iter().zip(&half).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let err = diff / 3.0 / (self.tol * sup(&half)).max(f64::MIN_POSITIVE);
            if err <= 1.0 {
                u.copy_from_slice(&half);
                s = if last { t } else { s + step };
                stats.accepted += 1;
                stats.last_h = step;
            } else {
                stats.rejected += 1;
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 4.0) };
            h = step * factor;
            if h <= f64::EPSILON * t {
                return Err(OdeError::StepUnderflow { t: s, h }.into());
            }
        }
        Ok(stats)
    }

    /// One step of the stiffly accurate SDIRK2 with `γ = 1 − 1/√2`.
    fn sdirk_step(&self, y: &mut [f64], h: f64) -> Result<(), HeatError> {
        let gamma = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let c = gamma * h;
        let y1 = self.solve_shifted(y, c)?;
        // A Y1 = (Y1 − y)/(γh)
        let rhs: Vec<f64> = y
            .iter()
            .zip(&y1)
            .map(|(&y0, &a)| y0 + (1.0 - gamma) * (a - y0) / gamma)
            .collect();
        let y2 = self.solve_shifted(&rhs, c)?;
        y.copy_from_slice(&y2);
        Ok(())
    }

    /// Solves `(I − cΔ) x = b` by conjugate gradients in `⟨·,·⟩_μ`.
    fn solve_shifted(&self, b: &[f64], c: f64) -> Result<Vec<f64>, HeatError> {
        let d = self.domain;
        let n = b.len();
        let apply = |x: &[f64], out: &mut [f64]| {
            d.laplacian_into(x, out);
            for i in 0..n {
                out[i] = x[i] - c * out[i];
            }
        };
        let mut x = b.to_vec();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut p = r.clone();
        let mut rr = d.inner(&r, &r);
        let target = (1e-2 * self.tol).powi(2) * d.inner(b, b);
        let mut ap = vec![0.0; n];
        for _ in 0..(10 * n).max(100) {
            if rr <= target {
                return Ok(x);
            }
            apply(&p, &mut ap);
            let alpha = rr / d.inner(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = d.inner(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        if rr <= 1e4 * target {
            return Ok(x);
        }
        Err(HeatError::InvalidInput(
            "conjugate gradients failed to converge on the shifted system".into(),
        ))
    }
}

fn check_field(domain: &TruncatedDomain, u: &[f64]) -> Result<(), HeatError> {
    if u.len() != domain.n() {
        return Err(HeatError::DimensionMismatch {
            expected: domain.n(),
            got: u.len(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(HeatError::InvalidInput("field has non-finite entries".into()));
    }
    Ok(())
}

/// `e^{tΔ} u0` to local relative tolerance `tol`.
pub fn heat_apply(
    domain: &TruncatedDomain,
    u0: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>, HeatError> {
    check_field(domain, u0)?;
    let prop = HeatPropagator::new(domain, tol)?;
    let mut u = u0.to_vec();
    prop.propagate(&mut u, t)?;
    Ok(u)
}

/// `p(·, y0, t)` on an increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelColumn {
    pub source: usize,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub tol: f64,
}

impl KernelColumn {
    /// Index of `t` in the grid, matched to a relative `1e-12`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Largest graph distance from `y0`, the reach needed for positivity.
fn eccentricity(domain: &TruncatedDomain, y0: usize) -> usize {
    domain
        .graph()
        .distances_from(y0)
        .into_iter()
        .max()
        .unwrap_or(0)
}

pub fn heat_kernel_column(
    domain: &TruncatedDomain,
    y0: usize,
    times: &[f64],
    tol: f64,
) -> Result<KernelColumn, HeatError> {
    let n = domain.n();
    if y0 >= n {
        return Err(HeatError::VertexOutOfRange { vertex: y0, n });
    }
    if times.is_empty() {
        return Err(HeatError::InvalidInput("empty time grid".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HeatError::InvalidInput(
            "kernel times must be nonnegative and strictly increasing".into(),
        ));
    }
    let prop = HeatPropagator::new(domain, tol)?.with_reach(eccentricity(domain, y0));
    let mut w = vec![0.0; n];
    w[y0] = 1.0 / domain.mu()[y0];
    let mut values = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in times {
        prop.propagate(&mut w, t - t_prev)?;
        t_prev = t;
        mass.push(domain.mass(&w));
        values.push(w.clone());
    }
    Ok(KernelColumn {
        source: y0,
        times: times.to_vec(),
        values,
        mass,
        tol,
    })
}

/// Cross-checks of the semigroup on a handful of sample vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    /// `max |p(x,y,t) − p(y,x,t)|`.
    pub symmetry_residual: f64,
    pub mass_max: f64,
    pub mass_min: f64,
    /// Largest increase of the mass between consecutive grid times.
    pub mass_increase: f64,
    /// `max |p(x,y,t+s) − Σ_z p(x,z,t) p(z,y,s) μ(z)|`.
    pub semigroup_residual: f64,
    /// Smallest kernel value at the smallest sample time.
    pub positivity_min: f64,
    pub decay_slope: f64,
    /// `−λ₁` of the domain.
    pub decay_slope_target: f64,
    pub envelope_constant: f64,
}

/// Window on which [`validate_kernel`] fits the decay slope.
pub const DECAY_WINDOW: (f64, f64) = (20.0, 40.0);

fn merge_grid(mut times: Vec<f64>) -> Vec<f64> {
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    times
}

/// Symmetry, mass, semigroup identity, positivity and decay on samples.
///
/// Semigroup pairs are all `(t, s)` with `t ≤ s` drawn from `times`.
pub fn validate_kernel(
    domain: &TruncatedDomain,
    samples: &[usize],
    times: &[f64],
    tol: f64,
) -> Result<KernelReport, HeatError> {
    if samples.is_empty() || times.is_empty() {
        return Err(HeatError::InvalidInput("need at least one sample vertex and time".into()));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(HeatError::InvalidInput("sample times must be positive".into()));
    }
    let mut pairs = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for &s in &times[i..] {
            pairs.push((t, s));
        }
    }
    let mut grid: Vec<f64> = times.to_vec();
    grid.extend(pairs.iter().map(|(t, s)| t + s));
    let grid = merge_grid(grid);

    let columns: Vec<KernelColumn> = samples
        .iter()
        .map(|&y| heat_kernel_column(domain, y, &grid, tol))
        .collect::<Result<_, _>>()?;

    let mut symmetry_residual = 0.0_f64;
    for (a, ca) in samples.iter().zip(&columns) {
        for (b, cb) in samples.iter().zip(&columns) {
            for k in 0..grid.len() {
                symmetry_residual =
                    symmetry_residual.max((ca.values[k][*b] - cb.values[k][*a]).abs());
            }
        }
    }

    let mass_max = columns.iter().flat_map(|c| c.mass.iter().copied()).fold(f64::MIN, f64::max);
    let mass_min = columns.iter().flat_map(|c| c.mass.iter().copied()).fold(f64::MAX, f64::min);
    let mass_increase = columns
        .iter()
        .flat_map(|c| c.mass.windows(2).map(|w| w[1] - w[0]))
        .fold(0.0, f64::max);

    let mut semigroup_residual = 0.0_f64;
    for (cx, &x) in columns.iter().zip(samples) {
        for cy in &columns {
            for &(t, s) in &pairs {
                let (it, is, its) = (
                    cx.index_of(t).unwrap(),
                    cy.index_of(s).unwrap(),
                    cy.index_of(t + s).unwrap(),
                );
                // p(x,z,t) = p(z,x,t) is read from the column of x.
                let conv = domain.inner(&cx.values[it], &cy.values[is]);
                semigroup_residual = semigroup_residual.max((cy.values[its][x] - conv).abs());
            }
        }
    }

    let t_first = grid[0];
    let positivity_min = columns
        .iter()
        .map(|c| c.values[c.index_of(t_first).unwrap()].iter().copied().fold(f64::MAX, f64::min))
        .fold(f64::MAX, f64::min);

    let lam = lambda1(domain, 1e-10)?.lambda1;
    let y = samples[0];
    let decay = kernel_decay_rate(domain, y, y, DECAY_WINDOW, lam, tol)?;

    Ok(KernelReport {
        symmetry_residual,
        mass_max,
        mass_min,
        mass_increase,
        semigroup_residual,
        positivity_min,
        decay_slope: decay.slope,
        decay_slope_target: -lam,
        envelope_constant: decay.envelope_constant,
    })
}

/// Least-squares decay of `log p(x, y, t)` over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    pub slope: f64,
    /// `max_t p(x,y,t) e^{λ₁ t}` over the window.
    pub envelope_constant: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Samples per window used by [`kernel_decay_rate`].
pub const DECAY_SAMPLES: usize = 41;

pub fn kernel_decay_rate(
    domain: &TruncatedDomain,
    x: usize,
    y: usize,
    window: (f64, f64),
    lambda1: f64,
    tol: f64,
) -> Result<DecayEstimate, HeatError> {
    let (ta, tb) = window;
    if !(ta >= 1.0 && tb > ta) {
        return Err(HeatError::InvalidInput(format!(
            "decay window must satisfy t_b > t_a ≥ 1, got [{ta}, {tb}]"
        )));
    }
    let n = domain.n();
    if x >= n {
        return Err(HeatError::VertexOutOfRange { vertex: x, n });
    }
    let times: Vec<f64> = (0..DECAY_SAMPLES)
        .map(|k| ta + (tb - ta) * k as f64 / (DECAY_SAMPLES - 1) as f64)
        .collect();
    let col = heat_kernel_column(domain, y, &times, tol)?;
    let values: Vec<f64> = col.values.iter().map(|v| v[x]).collect();
    for (&t, &p) in times.iter().zip(&values) {
        if !(p > f64::MIN_POSITIVE) {
            return Err(HeatError::UnderflowWindow { t });
        }
    }
    let m = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|p| p.ln()).collect();
    let tm = times.iter().sum::<f64>() / m;
    let lm = logs.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in times.iter().zip(&logs) {
        sxy += (t - tm) * (l - lm);
        sxx += (t - tm) * (t - tm);
    }
    let envelope_constant = times
        .iter()
        .zip(&values)
        .map(|(t, p)| p * (lambda1 * t).exp())
        .fold(0.0, f64::max);
    Ok(DecayEstimate {
        slope: sxy / sxx,
        envelope_constant,
        times,
        values,
    })
}

type CacheKey = (u64, usize, u64, Vec<u64>);

/// Shared, write-once store of kernel columns.
#[derive(Debug, Default)]
pub struct KernelCache {
    columns: RwLock<HashMap<CacheKey, Arc<KernelColumn>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        domain: &TruncatedDomain,
        y0: usize,
        times: &[f64],
        tol: f64,
    ) -> Result<Arc<KernelColumn>, HeatError> {
        let key = (
            domain.fingerprint(),
            y0,
            tol.to_bits(),
            times.iter().map(|t| t.to_bits()).collect(),
        );
        if let Some(c) = self.columns.read().unwrap().get(&key) {
            return Ok(Arc::clone(c));
        }
        let col = Arc::new(heat_kernel_column(domain, y0, times, tol)?);
        let mut w = self.columns.write().unwrap();
        Ok(Arc::clone(w.entry(key).or_insert(col)))
    }

    pub fn len(&self) -> usize {
        self.columns.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
