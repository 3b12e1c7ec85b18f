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

//! Blow-up and global-existence machinery for `u_t = Δu + h(t) u^q`.
//!
//! * `Φ_x^T(t) = Σ_z p(x,z,T−t) u(z,t) μ(z)` and the differential
//!   inequality `Φ' ≥ h Φ^q` it obeys along any nonnegative solution.
//! * The upper bound on the blow-up time: any solution must blow up by the
//!   first `T` with `(q−1) H(T) [(e^{TΔ}u₀)(x)]^{q−1} ≥ 1`.
//! * The kernel lower bound `(e^{tΔ}u₀)(x₀) ≥ u₀(x₀)μ(x₀) e^{−(λ₁+ε)t}` for
//!   large `t`.
//! * The growth criterion comparing `H^{1/(q−1)}` with `e^{(λ₁+ε)t}`.
//! * A certificate `(δ, M, ε, γ, y₀)` for global existence with
//!   `u ≤ M p(·, y₀, t+γ)`.

use std::fmt;

use thiserror::Error;

use crate::graph::TruncatedDomain;
use crate::heat::{heat_apply, heat_kernel_column, HeatError, HeatPropagator};
use crate::mild::Trajectory;
use crate::ode::sup;
use crate::source::SourceSpec;
use crate::spectral::ABSOLUTE_FLOOR;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlowupError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("no blow-up bound before t = {cap}")]
    NoBoundInHorizon { cap: f64 },
    #[error("time window too short: {0}")]
    WindowTooShort(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Heat(#[from] HeatError),
}

/// `H(t) = ∫₀ᵗ h`.
pub fn cumulative_h(h: &SourceSpec, t: f64) -> f64 {
    h.cumulative(t)
}

/// `H̃ = ∫₀^∞ h(t) e^{−λ₁(q−1)t} dt`, `+∞` when divergent.
pub fn h_tilde(h: &SourceSpec, lambda1: f64, q: f64) -> f64 {
    h.discounted_total(lambda1 * (q - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSeries {
    pub x: usize,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `H` on the same grid.
    pub h_values: Vec<f64>,
    /// `|Φ(0) − (e^{TΔ}u₀)(x)| / |(e^{TΔ}u₀)(x)|`, the second value computed
    /// by propagating the datum directly.
    pub identity_residual: f64,
}

/// `Φ_x^T` on the trajectory's stored times in `[0, T]`.
pub fn phi_series(
    trajectory: &Trajectory,
    domain: &TruncatedDomain,
    x: usize,
    t_final: f64,
    tol: f64,
    source: &SourceSpec,
) -> Result<PhiSeries, BlowupError> {
    let n = domain.n();
    if x >= n {
        return Err(BlowupError::InvalidInput(format!("probe {x} out of range for {n} vertices")));
    }
    let k_end = trajectory.index_of(t_final).ok_or_else(|| {
        BlowupError::GridMismatch(format!("T = {t_final} is not a stored trajectory time"))
    })?;
    if trajectory.times.first() != Some(&0.0) {
        return Err(BlowupError::GridMismatch("trajectory does not start at t = 0".into()));
    }
    let times: Vec<f64> = trajectory.times[..=k_end].to_vec();
    // Kernel times T − t_k in increasing order; p(x,z,s) = p(z,x,s).
    let lags: Vec<f64> = times.iter().rev().map(|&t| (t_final - t).max(0.0)).collect();
    let column = heat_kernel_column(domain, x, &lags, tol)?;
    let m = times.len();
    let values: Vec<f64> = (0..m)
        .map(|k| domain.inner(&column.values[m - 1 - k], &trajectory.fields[k]))
        .collect();
    let direct = heat_apply(domain, &trajectory.fields[0], t_final, tol)?[x];
    let identity_residual = if direct == 0.0 {
        values[0].abs()
    } else {
        (values[0] - direct).abs() / direct.abs()
    };
    Ok(PhiSeries {
        x,
        t_final,
        h_values: times.iter().map(|&t| source.cumulative(t)).collect(),
        times,
        values,
        identity_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiOdeCheck {
    /// Largest relative shortfall of `Φ(t_k)^{1−q} − Φ(t_{k+1})^{1−q}` below
    /// `(q−1)(H(t_{k+1}) − H(t_k))`; negative when the inequality holds
    /// strictly.
    pub max_violation: f64,
    pub at: f64,
    /// Largest relative decrease of `Φ` between neighbouring times.
    pub max_decrease: f64,
}

/// Checks `Φ' ≥ h Φ^q` on each grid interval.
///
/// Separating variables turns the inequality into
/// `Φ(a)^{1−q} − Φ(b)^{1−q} ≥ (q−1)(H(b) − H(a))`, which uses the exact `H`
/// and needs no quadrature of `Φ^q`.
pub fn phi_ode_check(series: &PhiSeries, h: &SourceSpec, q: f64) -> Result<PhiOdeCheck, BlowupError> {
    let t = &series.times;
    if t.len() < 2 {
        return Err(BlowupError::GridMismatch("need at least two grid times".into()));
    }
    let dt = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(BlowupError::GridMismatch("Φ series grid is not uniform".into()));
    }
    let phi = &series.values;
    let mut max_violation = f64::NEG_INFINITY;
    let mut at = t[0];
    for k in 0..t.len() - 1 {
        let (a, b) = (phi[k], phi[k + 1]);
        let v = if a <= 0.0 {
            // Φ ≡ 0 up to here; only monotonicity can fail.
            if b >= 0.0 { 0.0 } else { 1.0 }
        } else {
            let need = (q - 1.0) * h.integral(t[k], t[k + 1]);
            let have = a.powf(1.0 - q) - b.max(0.0).powf(1.0 - q);
            if need > 0.0 {
                (need - have) / need
            } else {
                (a - b) / a
            }
        };
        if v > max_violation {
            max_violation = v;
            at = t[k];
        }
    }
    let max_decrease = phi
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(PhiOdeCheck {
        max_violation,
        at,
        max_decrease,
    })
}

/// Cells in the coarse scan of [`blowup_time_bound`].
const BOUND_SCAN_CELLS: usize = 4000;

/// Smallest `T ≤ cap` with `(q−1) H(T) [(e^{TΔ}u₀)(x)]^{q−1} ≥ 1`, located
/// by a coarse scan and refined by bisection to relative `1e-6`.
pub fn blowup_time_bound(
    domain: &TruncatedDomain,
    u0: &[f64],
    x: usize,
    q: f64,
    h: &SourceSpec,
    cap: f64,
    tol: f64,
) -> Result<f64, BlowupError> {
    let n = domain.n();
    if u0.len() != n {
        return Err(BlowupError::InvalidInput(format!(
            "datum has {} entries, domain has {n} vertices",
            u0.len()
        )));
    }
    if x >= n {
        return Err(BlowupError::InvalidInput(format!("probe {x} out of range for {n} vertices")));
    }
    if u0.iter().any(|v| !(*v >= 0.0)) || u0.iter().all(|&v| v == 0.0) {
        return Err(BlowupError::InvalidInput(
            "datum must be nonnegative and not identically zero".into(),
        ));
    }
    if !(q > 1.0) || !(cap > 0.0) {
        return Err(BlowupError::InvalidInput(format!("need q > 1 and cap > 0, got q = {q}, cap = {cap}")));
    }
    let prop = HeatPropagator::new(domain, tol)?;
    let product = |t: f64, value: f64| (q - 1.0) * h.cumulative(t) * value.max(0.0).powf(q - 1.0);

    let dt = cap / BOUND_SCAN_CELLS as f64;
    let mut w = u0.to_vec();
    let mut t_prev = 0.0;
    let mut w_prev = w.clone();
    for k in 1..=BOUND_SCAN_CELLS {
        let t = k as f64 * dt;
        prop.propagate(&mut w, dt)?;
        if product(t, w[x]) >= 1.0 {
            let (mut lo, mut hi) = (t_prev, t);
            while hi - lo > 1e-7 * hi {
                let mid = 0.5 * (lo + hi);
                let mut v = w_prev.clone();
                prop.propagate(&mut v, mid - t_prev)?;
                if product(mid, v[x]) >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        t_prev = t;
        w_prev.copy_from_slice(&w);
    }
    Err(BlowupError::NoBoundInHorizon { cap })
}

/// Default probes: the origin and the first vertex at half the radius.
pub fn default_probes(domain: &TruncatedDomain) -> Vec<usize> {
    let dist = domain.graph().distances_from(domain.origin());
    let reach = if domain.radius() > 0 {
        domain.radius() as usize
    } else {
        dist.iter().copied().max().unwrap_or(0)
    };
    let mut probes = vec![domain.origin()];
    if let Some(mid) = dist.iter().position(|&d| d == reach / 2) {
        if mid != domain.origin() {
            probes.push(mid);
        }
    }
    probes
}

/// Minimum of [`blowup_time_bound`] over probes, with the minimizing probe.
/// Probes whose bound falls beyond the cap are skipped.
pub fn blowup_time_bound_over(
    domain: &TruncatedDomain,
    u0: &[f64],
    probes: &[usize],
    q: f64,
    h: &SourceSpec,
    cap: f64,
    tol: f64,
) -> Result<(f64, usize), BlowupError> {
    let mut best: Option<(f64, usize)> = None;
    for &x in probes {
        match blowup_time_bound(domain, u0, x, q, h, cap, tol) {
            Ok(t) => {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, x));
                }
            }
            Err(BlowupError::NoBoundInHorizon { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(BlowupError::NoBoundInHorizon { cap })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundCheck {
    /// `u₀(x₀) μ(x₀)`.
    pub c1: f64,
    /// First grid time after which the bound holds at every later grid time.
    pub t0: Option<f64>,
    pub holds: bool,
    /// `(e^{tΔ}u₀)(x₀)` on the grid.
    pub values: Vec<f64>,
}

/// Checks `(e^{tΔ}u₀)(x₀) ≥ C₁ e^{−(λ₁+ε)t}` on a time grid.
pub fn lower_bound_check(
    domain: &TruncatedDomain,
    u0: &[f64],
    x0: usize,
    eps: f64,
    lambda1: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<LowerBoundCheck, BlowupError> {
    let n = domain.n();
    if u0.len() != n || x0 >= n {
        return Err(BlowupError::InvalidInput("datum or vertex does not fit the domain".into()));
    }
    if !(u0[x0] > 0.0) {
        return Err(BlowupError::InvalidInput(format!("u0({x0}) must be positive")));
    }
    if !(eps > 0.0) || (lambda1 > ABSOLUTE_FLOOR && eps >= lambda1) {
        return Err(BlowupError::InvalidInput(format!(
            "eps must lie in (0, λ₁) with λ₁ = {lambda1}, got {eps}"
        )));
    }
    if t_grid.len() < 2 || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BlowupError::WindowTooShort(
            "need at least two increasing nonnegative grid times".into(),
        ));
    }
    let prop = HeatPropagator::new(domain, tol)?;
    let c1 = u0[x0] * domain.mu()[x0];
    let mut w = u0.to_vec();
    let mut t_prev = 0.0;
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        prop.propagate(&mut w, t - t_prev)?;
        t_prev = t;
        values.push(w[x0]);
    }
    let ok: Vec<bool> = t_grid
        .iter()
        .zip(&values)
        .map(|(&t, &v)| v >= c1 * (-(lambda1 + eps) * t).exp())
        .collect();
    let t0 = match ok.iter().rposition(|&b| !b) {
        None => Some(t_grid[0]),
        Some(k) if k + 1 < t_grid.len() => Some(t_grid[k + 1]),
        Some(_) => None,
    };
    Ok(LowerBoundCheck {
        c1,
        t0,
        holds: t0.is_some(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionVerdict {
    /// `H^{1/(q−1)}` outgrows `e^{(λ₁+ε)t}` for the reported `ε`.
    Diverges { eps: f64 },
    Converges,
    /// The growth rate is within the decision band of a threshold.
    Inconclusive,
}

impl fmt::Display for CriterionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionVerdict::Diverges { .. } => write!(f, "diverges"),
            CriterionVerdict::Converges => write!(f, "converges"),
            CriterionVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub verdict: CriterionVerdict,
    /// Exponential growth rate of `H^{1/(q−1)}`.
    pub growth_rate: f64,
    pub eps_grid: Vec<f64>,
}

/// Half-width of the band in which the criterion declines to decide.
pub const CRITERION_BAND: f64 = 1e-3;

/// Exponential growth rate of `H(t)^{1/(q−1)}`.
pub fn growth_rate(h: &SourceSpec, q: f64) -> f64 {
    match h {
        SourceSpec::Exponential { alpha } => alpha.max(0.0) / (q - 1.0),
        SourceSpec::Constant { .. } | SourceSpec::Power { .. } => 0.0,
        SourceSpec::Table { nodes } => {
            let t_end = nodes[nodes.len() - 1].0;
            if t_end == 0.0 {
                return 0.0;
            }
            let (a, b) = (0.5 * t_end, t_end);
            let (ha, hb) = (h.cumulative(a), h.cumulative(b));
            if ha <= 0.0 || hb <= 0.0 {
                return 0.0;
            }
            (hb.ln() - ha.ln()) / (b - a) / (q - 1.0)
        }
    }
}

/// Compares the growth of `H^{1/(q−1)}` with `e^{(λ₁+ε)t}` for
/// `ε ∈ {λ₁/8, λ₁/4, λ₁/2, 3λ₁/4}` and reports the smallest witnessing `ε`.
pub fn blowup_criterion(h: &SourceSpec, q: f64, lambda1: f64) -> Result<CriterionResult, BlowupError> {
    if !(lambda1 > 0.0) || !(q > 1.0) {
        return Err(BlowupError::InvalidInput(format!(
            "need λ₁ > 0 and q > 1, got λ₁ = {lambda1}, q = {q}"
        )));
    }
    let eps_grid: Vec<f64> = [0.125, 0.25, 0.5, 0.75].iter().map(|f| f * lambda1).collect();
    let rate = growth_rate(h, q);
    let verdict = if let Some(&eps) = eps_grid.iter().find(|&&e| rate - (lambda1 + e) > CRITERION_BAND) {
        CriterionVerdict::Diverges { eps }
    } else if eps_grid.iter().any(|&e| (rate - (lambda1 + e)).abs() <= CRITERION_BAND) {
        CriterionVerdict::Inconclusive
    } else {
        CriterionVerdict::Converges
    };
    Ok(CriterionResult {
        verdict,
        growth_rate: rate,
        eps_grid,
    })
}

/// Hypotheses checked by [`global_certificate`], in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateCheck {
    /// `‖u₀‖∞ < δ`.
    DatumBelowDelta,
    /// `M ≤ δ / C̲`.
    MWithinDeltaOverC,
    /// `δ^{q−1} H̃ < 1`.
    DeltaPowerBelowOne,
    /// `0 < ε < M (1 − δ^{q−1} H̃)`.
    EpsilonAdmissible,
    /// `q δ^{q−1} H̃ < 1`.
    ContractionBelowOne,
    /// `u₀ ≤ ε p(·, y₀, γ)`.
    DatumBelowKernel,
}

impl CertificateCheck {
    pub const ALL: [CertificateCheck; 6] = [
        CertificateCheck::DatumBelowDelta,
        CertificateCheck::MWithinDeltaOverC,
        CertificateCheck::DeltaPowerBelowOne,
        CertificateCheck::EpsilonAdmissible,
        CertificateCheck::ContractionBelowOne,
        CertificateCheck::DatumBelowKernel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CertificateCheck::DatumBelowDelta => "datum_below_delta",
            CertificateCheck::MWithinDeltaOverC => "m_within_delta_over_c",
            CertificateCheck::DeltaPowerBelowOne => "delta_htilde_below_one",
            CertificateCheck::EpsilonAdmissible => "epsilon_admissible",
            CertificateCheck::ContractionBelowOne => "q_delta_htilde_below_one",
            CertificateCheck::DatumBelowKernel => "datum_below_eps_kernel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub delta: f64,
    pub m_bound: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub y0: usize,
    pub h_tilde: f64,
    /// Measured `C̲` with `p(x, y₀, t) ≤ C̲ e^{−λ₁t}` on the window.
    pub c_lower: f64,
    pub lambda1: f64,
    pub checks: Vec<(CertificateCheck, bool)>,
    pub granted: bool,
    pub first_failure: Option<CertificateCheck>,
}

/// Window and spacing on which `C̲` is measured.
pub const ENVELOPE_WINDOW: (f64, f64) = (1.0, 40.0);
const ENVELOPE_STEP: f64 = 0.5;
const DELTA_GRID: usize = 400;

/// `max_{x, t} p(x, y₀, t) e^{λ₁ t}` over [`ENVELOPE_WINDOW`].
pub fn envelope_constant(
    domain: &TruncatedDomain,
    y0: usize,
    lambda1: f64,
    tol: f64,
) -> Result<f64, BlowupError> {
    let (a, b) = ENVELOPE_WINDOW;
    let k = ((b - a) / ENVELOPE_STEP).round() as usize;
    let times: Vec<f64> = (0..=k).map(|i| a + i as f64 * ENVELOPE_STEP).collect();
    let col = heat_kernel_column(domain, y0, &times, tol)?;
    Ok(times
        .iter()
        .zip(&col.values)
        .map(|(&t, v)| sup(v) * (lambda1 * t).exp())
        .fold(0.0, f64::max))
}

/// Searches `(δ, M, ε)` for the global-existence hypotheses and records
/// which hold.
#[allow(clippy::too_many_arguments)]
pub fn global_certificate(
    domain: &TruncatedDomain,
    u0: &[f64],
    q: f64,
    h: &SourceSpec,
    gamma: f64,
    y0: usize,
    lambda1: f64,
    tol: f64,
) -> Result<Certificate, BlowupError> {
    let n = domain.n();
    if u0.len() != n || y0 >= n {
        return Err(BlowupError::InvalidInput("datum or y0 does not fit the domain".into()));
    }
    if u0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(BlowupError::InvalidInput("datum must be finite and nonnegative".into()));
    }
    if !(lambda1 > 0.0) || !(q > 1.0) || !(gamma > 0.0) {
        return Err(BlowupError::InvalidInput(format!(
            "need λ₁ > 0, q > 1, γ > 0; got λ₁ = {lambda1}, q = {q}, γ = {gamma}"
        )));
    }
    let c_lower = envelope_constant(domain, y0, lambda1, tol)?;
    let ht = h_tilde(h, lambda1, q);
    let norm = sup(u0);
    let p_gamma = heat_kernel_column(domain, y0, &[gamma], tol)?.values.remove(0);

    let eps_max = |delta: f64| (delta / c_lower) * (1.0 - delta.powf(q - 1.0) * ht);
    let delta = if ht.is_finite() {
        let delta_max = if ht > 0.0 {
            (1.0 / (q * ht)).powf(1.0 / (q - 1.0))
        } else {
            f64::INFINITY
        };
        if !delta_max.is_finite() {
            // h ≡ 0: every δ above the datum works.
            if norm > 0.0 { 2.0 * norm } else { 1.0 }
        } else if norm >= delta_max {
            delta_max
        } else {
            let lo = if norm > 0.0 { norm } else { delta_max * 1e-8 };
            // Interior log grid, endpoints excluded.
            (1..DELTA_GRID)
                .map(|k| lo * (delta_max / lo).powf(k as f64 / DELTA_GRID as f64))
                .fold((lo, f64::NEG_INFINITY), |best, d| {
                    let e = eps_max(d);
                    if e > best.1 { (d, e) } else { best }
                })
                .0
        }
    } else if norm > 0.0 {
        2.0 * norm
    } else {
        1.0
    };
    let m_bound = delta / c_lower;
    let power = if ht.is_finite() { delta.powf(q - 1.0) * ht } else { f64::INFINITY };

    let mut eps_needed = 0.0_f64;
    let mut datum_fits = true;
    for (&u, &p) in u0.iter().zip(&p_gamma) {
        if u > 0.0 {
            if p > 0.0 {
                eps_needed = eps_needed.max(u / p);
            } else {
                datum_fits = false;
            }
        }
    }
    let epsilon = if norm == 0.0 {
        0.5 * m_bound * (1.0 - power)
    } else {
        eps_needed * (1.0 + 4.0 * f64::EPSILON)
    };

    let checks = vec![
        (CertificateCheck::DatumBelowDelta, norm < delta),
        (CertificateCheck::MWithinDeltaOverC, m_bound <= delta / c_lower),
        (CertificateCheck::DeltaPowerBelowOne, power < 1.0),
        (
            CertificateCheck::EpsilonAdmissible,
            epsilon > 0.0 && epsilon < m_bound * (1.0 - power),
        ),
        (CertificateCheck::ContractionBelowOne, q * power < 1.0),
        (
            CertificateCheck::DatumBelowKernel,
            datum_fits && u0.iter().zip(&p_gamma).all(|(&u, &p)| u <= epsilon * p),
        ),
    ];
    let first_failure = checks.iter().find(|(_, ok)| !ok).map(|(c, _)| *c);
    Ok(Certificate {
        delta,
        m_bound,
        epsilon,
        gamma,
        y0,
        h_tilde: ht,
        c_lower,
        lambda1,
        granted: first_failure.is_none(),
        first_failure,
        checks,
    })
}
