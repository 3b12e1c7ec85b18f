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

//! Mild solutions of `u_t = Δu + h(t) u^q` by slab-wise Picard iteration.
//!
//! On a slab `[a, a + τ]` the Duhamel map is
//!
//! ```text
//! Ψu(t) = e^{(t−a)Δ} u(a) + ∫_a^t e^{(t−s)Δ} h(s) u(s)^q ds,
//! ```
//!
//! where `e^{tΔ}` carries the measure, `(e^{tΔ}f)(x) = Σ_y p(x,y,t) f(y) μ(y)`.
//! With `m = ‖u(a)‖∞` and `M = 2m` the slab is the longest one with
//!
//! ```text
//! q M^{q−1} ∫_a^{a+τ} h ≤ 1/2        (contraction)
//! m + M^q ∫_a^{a+τ} h ≤ M            (invariance of the ball of radius M)
//! ```
//!
//! The integral is discretized on `N` (even) equal sub-intervals by a
//! propagated Simpson rule: on `[s_{j−2}, s_j]` the integrand
//! `s ↦ e^{(s_j−s)Δ} g(s)` is interpolated through the three nodes, so only
//! `e^{δΔ}` and `e^{2δΔ}` of node values are needed.
//!
//! Blow-up is declared when the designed slab drops below `dt_min` or the
//! sup-norm passes `U_max`. The upper end of the bracket comes from the
//! restart bound: the smallest `τ` with
//! `(q−1) ∫_t^{t+τ} h · [(e^{τΔ}u(t))(x*)]^{q−1} ≥ 1`, `x*` the argmax of
//! `u(t)`, beyond which no solution started from `u(t)` can survive.

use thiserror::Error;

use crate::graph::TruncatedDomain;
use crate::heat::{heat_kernel_column, HeatError, HeatPropagator};
use crate::ode::{sup, EmbeddedRk, FEHLBERG_45};
use crate::source::{SourceError, SourceSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MildError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("Picard contraction factor {factor} on [{t_a}, {t_b}] exceeds the limit")]
    ContractionViolated { factor: f64, t_a: f64, t_b: f64 },
    #[error("Picard iteration did not settle on [{t_a}, {t_b}] (distance {distance:e})")]
    PicardStalled { distance: f64, t_a: f64, t_b: f64 },
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e12;
pub const DEFAULT_DT_MIN: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub domain: &'a TruncatedDomain,
    pub q: f64,
    pub source: SourceSpec,
    pub u0: Vec<f64>,
    pub horizon: f64,
    pub tol: f64,
    pub blowup_threshold: f64,
    pub dt_min: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        domain: &'a TruncatedDomain,
        q: f64,
        source: SourceSpec,
        u0: Vec<f64>,
        horizon: f64,
    ) -> Result<Self, MildError> {
        let p = Problem {
            domain,
            q,
            source,
            u0,
            horizon,
            tol: DEFAULT_TOL,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            dt_min: DEFAULT_DT_MIN,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MildError> {
        let bad = |m: String| Err(MildError::InvalidProblem(m));
        if !(self.q > 1.0 && self.q.is_finite()) {
            return bad(format!("q must exceed 1, got {}", self.q));
        }
        if self.u0.len() != self.domain.n() {
            return bad(format!(
                "datum has {} entries, domain has {} vertices",
                self.u0.len(),
                self.domain.n()
            ));
        }
        if self.u0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("datum must be finite and nonnegative".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if !(self.dt_min > 0.0) || !(self.blowup_threshold > 0.0) {
            return bad("dt_min and blowup_threshold must be positive".into());
        }
        self.source.validate()?;
        Ok(())
    }

    /// Tolerance handed to the heat propagator inside the solvers.
    pub fn heat_tol(&self) -> f64 {
        (self.tol * 1e-2).max(1e-13)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Times at which fields are stored. `None` stores every slab end.
    pub output_times: Option<Vec<f64>>,
    /// Sub-intervals per slab; even.
    pub nodes: usize,
    pub max_slab: f64,
    pub max_picard: usize,
    pub contraction_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            output_times: None,
            nodes: 8,
            max_slab: 0.5,
            max_picard: 60,
            contraction_limit: 0.75,
        }
    }
}

impl SolveOptions {
    /// Outputs at `0, dt, 2dt, …` up to and including `horizon`.
    pub fn with_output_step(dt: f64, horizon: f64) -> Self {
        let k = (horizon / dt).round() as usize;
        let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * dt).filter(|&t| t < horizon).collect();
        if times.last().is_none_or(|&t| t < horizon) {
            times.push(horizon);
        }
        SolveOptions {
            output_times: Some(times),
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    CompletedHorizon,
    BlowupDetected { t_lo: f64, t_hi: f64 },
    SolverFailure { t: f64, reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::CompletedHorizon => "completed",
            Verdict::BlowupDetected { .. } => "blowup",
            Verdict::SolverFailure { .. } => "failure",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Verdict::BlowupDetected { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabStats {
    pub t_start: f64,
    pub length: f64,
    /// Slab length allowed by the contraction and invariance budgets.
    pub designed_length: f64,
    pub iterations: usize,
    pub contraction_factor: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub supnorm: Vec<f64>,
    pub mass: Vec<f64>,
    pub verdict: Verdict,
    pub slabs: Vec<SlabStats>,
}

impl Trajectory {
    fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            fields: Vec::new(),
            supnorm: Vec::new(),
            mass: Vec::new(),
            verdict: Verdict::CompletedHorizon,
            slabs: Vec::new(),
        }
    }

    fn push(&mut self, domain: &TruncatedDomain, t: f64, u: &[f64]) {
        if self.times.last() == Some(&t) {
            return;
        }
        self.times.push(t);
        self.supnorm.push(sup(u));
        self.mass.push(domain.mass(u));
        self.fields.push(u.to_vec());
    }

    /// Largest stored contraction factor over all slabs.
    pub fn max_contraction(&self) -> f64 {
        self.slabs.iter().map(|s| s.contraction_factor).fold(0.0, f64::max)
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Fixed point of the Duhamel map on one slab.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSolution {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub contraction_factor: f64,
    pub iterations: usize,
    pub distance: f64,
}

/// Picard iteration for the Duhamel map on `[t_a, t_b]` from `state`.
pub fn picard_slab(
    problem: &Problem,
    state: &[f64],
    t_a: f64,
    t_b: f64,
    opts: &SolveOptions,
) -> Result<SlabSolution, MildError> {
    let prop = HeatPropagator::new(problem.domain, problem.heat_tol())?;
    picard_slab_with(&prop, problem, state, t_a, t_b, opts)
}

fn picard_slab_with(
    prop: &HeatPropagator,
    problem: &Problem,
    state: &[f64],
    t_a: f64,
    t_b: f64,
    opts: &SolveOptions,
) -> Result<SlabSolution, MildError> {
    let n = state.len();
    let nodes = opts.nodes.max(2) + opts.nodes % 2;
    if !(t_b > t_a) {
        return Err(MildError::InvalidProblem(format!("empty slab [{t_a}, {t_b}]")));
    }
    let delta = (t_b - t_a) / nodes as f64;
    let times: Vec<f64> = (0..=nodes)
        .map(|j| if j == nodes { t_b } else { t_a + j as f64 * delta })
        .collect();
    let hs: Vec<f64> = times.iter().map(|&t| problem.source.h(t)).collect();
    let q = problem.q;

    let mut free = vec![state.to_vec()];
    for j in 1..=nodes {
        let mut f = free[j - 1].clone();
        prop.propagate(&mut f, delta)?;
        free.push(f);
    }

    let heat = |f: &[f64], t: f64| -> Result<Vec<f64>, MildError> {
        let mut w = f.to_vec();
        prop.propagate(&mut w, t)?;
        Ok(w)
    };

    let mut u: Vec<Vec<f64>> = free.iter().map(|f| f.iter().map(|v| v.max(0.0)).collect()).collect();
    let mut prev_distance = f64::NAN;
    let mut factor = 0.0_f64;
    let mut distance = f64::INFINITY;
    let noise = 10.0 * problem.heat_tol();

    for iter in 1..=opts.max_picard {
        let g: Vec<Vec<f64>> = u
            .iter()
            .zip(&hs)
            .map(|(uj, &h)| uj.iter().map(|&v| h * v.max(0.0).powf(q)).collect())
            .collect();
        let p1: Vec<Vec<f64>> = g[..nodes].iter().map(|gj| heat(gj, delta)).collect::<Result<_, _>>()?;
        let p2: Vec<Vec<f64>> = p1[..nodes - 1]
            .iter()
            .map(|pj| heat(pj, delta))
            .collect::<Result<_, _>>()?;

        let mut integral: Vec<Vec<f64>> = Vec::with_capacity(nodes + 1);
        integral.push(vec![0.0; n]);
        // First interval: Simpson with the midpoint value of g extrapolated
        // quadratically from the first three nodes.
        let mid: Vec<f64> = (0..n)
            .map(|i| (3.0 * g[0][i] + 6.0 * g[1][i] - g[2][i]) / 8.0)
            .collect();
        let mid = heat(&mid, 0.5 * delta)?;
        integral.push(
            (0..n)
                .map(|i| delta / 6.0 * (p1[0][i] + 4.0 * mid[i] + g[1][i]))
                .collect(),
        );
        for j in 2..=nodes {
            let next: Vec<f64> = if j % 2 == 0 {
                let carried = heat(&integral[j - 2], 2.0 * delta)?;
                (0..n)
                    .map(|i| carried[i] + delta / 3.0 * (p2[j - 2][i] + 4.0 * p1[j - 1][i] + g[j][i]))
                    .collect()
            } else {
                let carried = heat(&integral[j - 1], delta)?;
                (0..n)
                    .map(|i| {
                        carried[i]
                            + delta / 12.0 * (-p2[j - 2][i] + 8.0 * p1[j - 1][i] + 5.0 * g[j][i])
                    })
                    .collect()
            };
            integral.push(next);
        }

        let mut d = 0.0_f64;
        let mut scale = 0.0_f64;
        let mut finite = true;
        for j in 0..=nodes {
            for i in 0..n {
                let v = (free[j][i] + integral[j][i]).max(0.0);
                if !v.is_finite() {
                    finite = false;
                }
                d = d.max((v - u[j][i]).abs());
                scale = scale.max(v);
                u[j][i] = v;
            }
        }
        if !finite {
            return Err(MildError::ContractionViolated {
                factor: f64::INFINITY,
                t_a,
                t_b,
            });
        }
        if prev_distance.is_finite() && prev_distance > noise * scale {
            factor = factor.max(d / prev_distance);
        }
        distance = d;
        if d <= problem.tol * scale || d == 0.0 {
            return Ok(SlabSolution {
                times,
                fields: u,
                contraction_factor: factor,
                iterations: iter,
                distance,
            });
        }
        if factor > opts.contraction_limit {
            return Err(MildError::ContractionViolated { factor, t_a, t_b });
        }
        prev_distance = d;
    }
    Err(MildError::PicardStalled { distance, t_a, t_b })
}

/// Longest slab from `t` allowed by the contraction and invariance budgets.
pub fn designed_slab(source: &SourceSpec, q: f64, t: f64, supnorm: f64) -> f64 {
    if supnorm == 0.0 {
        return f64::INFINITY;
    }
    let m = 2.0 * supnorm;
    let contraction = 1.0 / (2.0 * q * m.powf(q - 1.0));
    let invariance = (m - supnorm) / m.powf(q);
    let budget = contraction.min(invariance);
    source.advance(t, budget) - t
}

/// Smallest `τ` with `(q−1) ∫_t^{t+τ} h · [(e^{τΔ}u)(x*)]^{q−1} ≥ 1`, where
/// `x*` maximizes `u`; `+∞` if none is found before `t + cap`.
pub fn restart_bound(
    prop: &HeatPropagator,
    source: &SourceSpec,
    q: f64,
    t: f64,
    u: &[f64],
    cap: f64,
) -> Result<f64, MildError> {
    let (xstar, m) = u
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    let product = |tau: f64| -> Result<f64, MildError> {
        let mut w = u.to_vec();
        prop.propagate(&mut w, tau)?;
        Ok((q - 1.0) * source.integral(t, t + tau) * w[xstar].max(0.0).powf(q - 1.0))
    };
    // Without diffusion the bound would be exactly this τ.
    let mut hi = source.advance(t, 1.0 / ((q - 1.0) * m.powf(q - 1.0))) - t;
    if !hi.is_finite() {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    while product(hi)? < 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if product(mid)? >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn next_output(outputs: &Option<Vec<f64>>, t: f64, horizon: f64) -> f64 {
    match outputs {
        Some(ts) => ts
            .iter()
            .copied()
            .find(|&s| s > t * (1.0 + 1e-14) + 1e-300)
            .map_or(horizon, |s| s.min(horizon)),
        None => horizon,
    }
}

fn is_output(outputs: &Option<Vec<f64>>, t: f64) -> bool {
    match outputs {
        Some(ts) => ts.iter().any(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0)),
        None => true,
    }
}

/// Mild solution on `[0, horizon]` or up to detected blow-up.
pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<Trajectory, MildError> {
    problem.validate()?;
    let domain = problem.domain;
    let prop = HeatPropagator::new(domain, problem.heat_tol())?;
    let mut traj = Trajectory::new();
    let mut u = problem.u0.clone();
    let mut t = 0.0;
    traj.push(domain, t, &u);

    let blowup = |traj: &mut Trajectory, t: f64, u: &[f64]| -> Result<(), MildError> {
        traj.push(domain, t, u);
        let tau = restart_bound(&prop, &problem.source, problem.q, t, u, 1e6)?;
        traj.verdict = Verdict::BlowupDetected {
            t_lo: t,
            t_hi: t + tau,
        };
        Ok(())
    };

    while t < problem.horizon {
        let m = sup(&u);
        if m >= problem.blowup_threshold {
            blowup(&mut traj, t, &u)?;
            return Ok(traj);
        }
        let designed = designed_slab(&problem.source, problem.q, t, m);
        if designed < problem.dt_min {
            blowup(&mut traj, t, &u)?;
            return Ok(traj);
        }
        let stop = next_output(&opts.output_times, t, problem.horizon);
        let mut tau = designed.min(opts.max_slab).min(stop - t);
        let mut halvings = 0;
        let sol = loop {
            let t_b = if tau >= stop - t { stop } else { t + tau };
            match picard_slab_with(&prop, problem, &u, t, t_b, opts) {
                Ok(s) => break s,
                Err(MildError::ContractionViolated { .. } | MildError::PicardStalled { .. }) => {
                    tau *= 0.5;
                    halvings += 1;
                    if tau < problem.dt_min {
                        traj.push(domain, t, &u);
                        traj.verdict = Verdict::SolverFailure {
                            t,
                            reason: format!(
                                "Picard slabs collapsed below dt_min while the designed slab is {designed:e}"
                            ),
                        };
                        return Ok(traj);
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let t_b = *sol.times.last().unwrap();
        traj.slabs.push(SlabStats {
            t_start: t,
            length: t_b - t,
            designed_length: designed,
            iterations: sol.iterations,
            contraction_factor: sol.contraction_factor,
            halvings,
        });
        u = sol.fields.into_iter().last().unwrap();
        t = t_b;
        if is_output(&opts.output_times, t) || t >= problem.horizon {
            traj.push(domain, t, &u);
        }
    }
    traj.verdict = Verdict::CompletedHorizon;
    Ok(traj)
}

/// Method-of-lines reference: Runge–Kutta–Fehlberg on the vertex system
/// `u' = Δu + h(t) u^q`, same outputs and verdict semantics as [`solve`].
pub fn mol_reference_solve(problem: &Problem, opts: &SolveOptions) -> Result<Trajectory, MildError> {
    problem.validate()?;
    let domain = problem.domain;
    let n = domain.n();
    let q = problem.q;
    let source = &problem.source;
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        domain.laplacian_into(y, dy);
        let h = source.h(t);
        for i in 0..n {
            dy[i] += h * y[i].max(0.0).powf(q);
        }
    };
    let rho = domain.operator_norm_bound();
    let h_max = (0.9 * FEHLBERG_45.stability_radius / rho.max(f64::MIN_POSITIVE)).min(opts.max_slab);
    let rtol = problem.tol;
    let prop = HeatPropagator::new(domain, problem.heat_tol())?;

    let mut rk = EmbeddedRk::new(&FEHLBERG_45, n);
    let mut traj = Trajectory::new();
    let mut u = problem.u0.clone();
    let mut u_new = vec![0.0; n];
    let mut t = 0.0;
    let u0_sup = sup(&u);
    traj.push(domain, t, &u);
    let mut h = h_max.min(problem.horizon);

    while t < problem.horizon {
        let m = sup(&u);
        if m >= problem.blowup_threshold {
            break;
        }
        let stop = next_output(&opts.output_times, t, problem.horizon);
        let last = t + h >= stop * (1.0 - 1e-15);
        let step = if last { stop - t } else { h };
        let err = rk.attempt(&mut rhs, t, &u, step, &mut u_new, rtol, 0.0);
        if err <= 1.0 && u_new.iter().all(|v| v.is_finite()) {
            std::mem::swap(&mut u, &mut u_new);
            t = if last { stop } else { t + step };
            if is_output(&opts.output_times, t) || t >= problem.horizon {
                traj.push(domain, t, &u);
            }
            h = (step * rk.factor(err)).min(h_max);
        } else {
            h = step * rk.factor(err.min(1e300));
            if h < problem.dt_min {
                if sup(&u) > u0_sup {
                    break;
                }
                traj.push(domain, t, &u);
                traj.verdict = Verdict::SolverFailure {
                    t,
                    reason: format!("step size {h:e} below dt_min without growth"),
                };
                return Ok(traj);
            }
        }
    }
    if t < problem.horizon {
        traj.push(domain, t, &u);
        let tau = restart_bound(&prop, source, q, t, &u, 1e6)?;
        traj.verdict = Verdict::BlowupDetected { t_lo: t, t_hi: t + tau };
    }
    Ok(traj)
}

/// Ratio `sup_x u(x,t) / p(x, y0, t+γ)` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundMonitor {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub bound: f64,
    pub holds: bool,
}

pub fn global_bound_monitor(
    trajectory: &Trajectory,
    domain: &TruncatedDomain,
    y0: usize,
    gamma: f64,
    bound: f64,
    tol: f64,
) -> Result<BoundMonitor, MildError> {
    if !(gamma > 0.0) {
        return Err(MildError::InvalidProblem(format!("gamma must be positive, got {gamma}")));
    }
    let shifted: Vec<f64> = trajectory.times.iter().map(|t| t + gamma).collect();
    let column = heat_kernel_column(domain, y0, &shifted, tol)?;
    let ratios: Vec<f64> = trajectory
        .fields
        .iter()
        .zip(&column.values)
        .map(|(u, p)| {
            u.iter().zip(p).fold(0.0_f64, |r, (&ui, &pi)| {
                if ui == 0.0 {
                    r
                } else if pi > 0.0 {
                    r.max(ui / pi)
                } else {
                    f64::INFINITY
                }
            })
        })
        .collect();
    let holds = ratios.iter().all(|&r| r <= bound);
    Ok(BoundMonitor {
        times: trajectory.times.clone(),
        ratios,
        bound,
        holds,
    })
}
