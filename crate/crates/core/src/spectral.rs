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

//! The weighted Laplacian and the bottom of the spectrum of `−Δ`.
//!
//! `−Δ` is self-adjoint on `ℓ²(μ)`, so `A = D^{1/2}(−Δ)D^{−1/2}` with
//! `D = diag(μ)` is a symmetric matrix with the same spectrum. The smallest
//! eigenvalue of `A` is found by restarted Lanczos with full
//! reorthogonalization and certified by the Ritz residual `‖Av − θv‖`.
//! A dense symmetric eigensolve is available for small domains.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::generators::GraphSpec;
use crate::graph::{GraphError, TruncatedDomain};

/// Below this value λ₁ is certified with an absolute residual bound.
pub const ABSOLUTE_FLOOR: f64 = 1e-10;

/// Largest domain handed to the dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("field has {got} entries, domain has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("λ₁ increased from {previous} (R = {previous_radius}) to {current} (R = {radius})")]
    MonotonicityViolation {
        previous_radius: u32,
        previous: f64,
        radius: u32,
        current: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: usize,
    pub radius: u32,
    pub method: EigenMethod,
}

/// `Δf(x) = (1/μ(x)) [Σ_y ω(x,y)(f(y) − f(x)) − kill(x) f(x)]`.
pub fn apply_laplacian(domain: &TruncatedDomain, f: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if f.len() != domain.n() {
        return Err(SpectralError::DimensionMismatch {
            expected: domain.n(),
            got: f.len(),
        });
    }
    let mut out = vec![0.0; f.len()];
    domain.laplacian_into(f, &mut out);
    Ok(out)
}

/// `⟨−Δf, f⟩_μ / ⟨f, f⟩_μ`.
pub fn rayleigh_quotient(domain: &TruncatedDomain, f: &[f64]) -> Result<f64, SpectralError> {
    let lf = apply_laplacian(domain, f)?;
    Ok(-domain.inner(&lf, f) / domain.inner(f, f))
}

/// Symmetrized operator `v ↦ D^{1/2}(−Δ)D^{−1/2} v`.
struct SymmetrizedOperator<'a> {
    domain: &'a TruncatedDomain,
    sqrt_mu: Vec<f64>,
    scratch: Vec<f64>,
    out: Vec<f64>,
}

impl<'a> SymmetrizedOperator<'a> {
    fn new(domain: &'a TruncatedDomain) -> Self {
        let n = domain.n();
        SymmetrizedOperator {
            domain,
            sqrt_mu: domain.mu().iter().map(|m| m.sqrt()).collect(),
            scratch: vec![0.0; n],
            out: vec![0.0; n],
        }
    }

    fn apply(&mut self, v: &[f64], result: &mut [f64]) {
        for ((s, &vi), &r) in self.scratch.iter_mut().zip(v).zip(&self.sqrt_mu) {
            *s = vi / r;
        }
        self.domain.laplacian_into(&self.scratch, &mut self.out);
        for ((res, &o), &r) in result.iter_mut().zip(&self.out).zip(&self.sqrt_mu) {
            *res = -o * r;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn converged(theta: f64, residual: f64, tol: f64) -> bool {
    if theta.abs() > ABSOLUTE_FLOOR {
        residual <= tol * theta.abs()
    } else {
        residual <= ABSOLUTE_FLOOR
    }
}

/// Knobs for the Lanczos iteration.
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub basis: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            basis: 80,
            max_restarts: 400,
        }
    }
}

/// Smallest eigenvalue of `−Δ` on the domain, certified to relative
/// residual `tol` (absolute [`ABSOLUTE_FLOOR`] near zero).
///
/// Falls back to the dense solver for small domains if Lanczos stalls.
pub fn lambda1(domain: &TruncatedDomain, tol: f64) -> Result<SpectralEstimate, SpectralError> {
    match lambda1_lanczos(domain, tol, LanczosOptions::default()) {
        Err(SpectralError::NoConvergence { .. }) if domain.n() <= DENSE_LIMIT => {
            lambda1_dense(domain)
        }
        other => other,
    }
}

pub fn lambda1_lanczos(
    domain: &TruncatedDomain,
    tol: f64,
    opts: LanczosOptions,
) -> Result<SpectralEstimate, SpectralError> {
    if !(tol > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = domain.n();
    let mut op = SymmetrizedOperator::new(domain);
    let m = opts.basis.min(n).max(1);

    // The ground state is positive, so √μ has a nonzero component along it.
    let mut start: Vec<f64> = op.sqrt_mu.clone();
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);

    let mut w = vec![0.0; n];
    let mut ritz = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut last_residual = f64::INFINITY;

    for _restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            // Two passes of classical Gram–Schmidt against the whole basis.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
                }
            }
            let bn = norm(&w);
            let scale = a.abs().max(beta.last().copied().unwrap_or(0.0)).max(1.0);
            if j + 1 == m || bn <= 1e-13 * scale {
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|x| x / bn).collect());
        }

        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let y = eig.eigenvectors.column(imin);

        ritz.iter_mut().for_each(|x| *x = 0.0);
        for (i, b) in basis.iter().take(k).enumerate() {
            let c = y[i];
            ritz.iter_mut().zip(b).for_each(|(r, bi)| *r += c * bi);
        }
        let rn = norm(&ritz);
        ritz.iter_mut().for_each(|x| *x /= rn);
        op.apply(&ritz, &mut av);
        matvecs += 1;
        let rq = dot(&ritz, &av);
        let residual = av
            .iter()
            .zip(&ritz)
            .map(|(a, r)| (a - rq * r).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if converged(rq, residual, tol) {
            return Ok(SpectralEstimate {
                lambda1: rq.max(0.0),
                residual,
                iterations: matvecs,
                radius: domain.radius(),
                method: EigenMethod::Lanczos,
            });
        }
        start.copy_from_slice(&ritz);
    }
    Err(SpectralError::NoConvergence {
        iterations: matvecs,
        residual: last_residual,
    })
}

/// Dense symmetric matrix `D^{1/2}(−Δ)D^{−1/2}`.
pub fn symmetrized_matrix(domain: &TruncatedDomain) -> DMatrix<f64> {
    let n = domain.n();
    let g = domain.graph();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = (g.degree(x) + domain.kill()[x]) / g.mu()[x];
        for &(y, w) in g.neighbors(x) {
            a[(x, y)] = -w / (g.mu()[x] * g.mu()[y]).sqrt();
        }
    }
    a
}

/// Smallest eigenvalue by a full dense eigensolve.
pub fn lambda1_dense(domain: &TruncatedDomain) -> Result<SpectralEstimate, SpectralError> {
    let n = domain.n();
    if n > DENSE_LIMIT {
        return Err(SpectralError::InvalidParameter(format!(
            "dense eigensolve limited to {DENSE_LIMIT} vertices, domain has {n}"
        )));
    }
    let a = symmetrized_matrix(domain);
    let eig = SymmetricEigen::new(a.clone());
    let (imin, lam) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let v: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
    let residual = (&a * &v - lam * &v).norm();
    Ok(SpectralEstimate {
        lambda1: lam.max(0.0),
        residual,
        iterations: 1,
        radius: domain.radius(),
        method: EigenMethod::Dense,
    })
}

/// How the exhaustion limit was extrapolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationModel {
    /// `λ(R) = λ∞ + Σ_{k≥2} c_k R^{−k}` through every radius.
    Richardson,
    /// `λ(R) = λ∞ + c ρ^R` through the last three radii.
    GeometricTail,
    /// Too few radii; the last estimate is reported as is.
    LastValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exhaustion {
    pub estimates: Vec<SpectralEstimate>,
    pub limit: f64,
    pub model: ExtrapolationModel,
    /// Change of the limit when the smallest radius is dropped from the fit.
    pub fit_residual: f64,
    /// Geometric-tail limit on the last three radii, when it exists.
    pub geometric_limit: Option<f64>,
}

/// Polynomial extrapolation in `1/R` with the linear term absent.
///
/// Returns `(λ∞, change when the smallest radius is dropped)`.
pub fn richardson_limit(radii: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    fn solve(radii: &[f64], values: &[f64]) -> Option<f64> {
        let m = radii.len();
        if m == 0 {
            return None;
        }
        if m == 1 {
            return Some(values[0]);
        }
        let r0 = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (i, &r) in radii.iter().enumerate() {
            let x = r0 / r;
            a[(i, 0)] = 1.0;
            for k in 1..m {
                a[(i, k)] = x.powi(k as i32 + 1);
            }
        }
        let b = DVector::from_column_slice(values);
        a.col_piv_qr().solve(&b).map(|c| c[0])
    }
    let full = solve(radii, values)?;
    let drop = if radii.len() >= 3 {
        solve(&radii[1..], &values[1..]).map(|v| (v - full).abs())
    } else {
        None
    };
    Some((full, drop.unwrap_or(f64::INFINITY)))
}

/// `λ∞ = λ₃ + d₂ r/(1 − r)` with `d_k` successive differences and
/// `r = d₂/d₁`; `None` unless the differences shrink geometrically.
pub fn geometric_tail_limit(values: &[f64]) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let v = &values[values.len() - 3..];
    let (d1, d2) = (v[1] - v[0], v[2] - v[1]);
    if d1 == 0.0 {
        return Some(v[2]);
    }
    let r = d2 / d1;
    if !(r > 0.0 && r < 1.0) {
        return None;
    }
    Some(v[2] + d2 * r / (1.0 - r))
}

/// λ₁ along a sequence of truncation radii of one family, plus the
/// extrapolated limit.
pub fn lambda1_exhaustion(
    family: &GraphSpec,
    radii: &[u32],
    tol: f64,
) -> Result<Exhaustion, SpectralError> {
    if radii.is_empty() {
        return Err(SpectralError::InvalidParameter("no radii given".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectralError::InvalidParameter(format!(
            "radii must be strictly increasing, got {radii:?}"
        )));
    }
    let mut estimates: Vec<SpectralEstimate> = Vec::with_capacity(radii.len());
    for &r in radii {
        let domain = family.with_radius(r)?.build()?;
        let est = lambda1(&domain, tol)?;
        if let Some(prev) = estimates.last() {
            let slack = 2.0 * tol * prev.lambda1.max(est.lambda1) + 2.0 * ABSOLUTE_FLOOR;
            if est.lambda1 > prev.lambda1 + slack {
                return Err(SpectralError::MonotonicityViolation {
                    previous_radius: prev.radius,
                    previous: prev.lambda1,
                    radius: r,
                    current: est.lambda1,
                });
            }
        }
        estimates.push(est);
    }
    let rs: Vec<f64> = radii.iter().map(|&r| r as f64).collect();
    let vs: Vec<f64> = estimates.iter().map(|e| e.lambda1).collect();
    let geometric_limit = geometric_tail_limit(&vs);
    let (limit, model, fit_residual) = if vs.len() >= 3 {
        match richardson_limit(&rs, &vs) {
            Some((l, res)) => (l, ExtrapolationModel::Richardson, res),
            None => (*vs.last().unwrap(), ExtrapolationModel::LastValue, f64::INFINITY),
        }
    } else {
        (*vs.last().unwrap(), ExtrapolationModel::LastValue, f64::INFINITY)
    };
    Ok(Exhaustion {
        estimates,
        limit,
        model,
        fit_residual,
        geometric_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_complete, gen_cycle, gen_lattice_box, gen_tree_ball, MeasureMode};

    #[test]
    fn laplacian_examples() {
        let c4 = gen_cycle(4).unwrap();
        assert_eq!(apply_laplacian(&c4, &[2.5; 4]).unwrap(), vec![0.0; 4]);
        let k2 = gen_complete(2).unwrap();
        assert_eq!(apply_laplacian(&k2, &[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        let t = gen_tree_ball(3, 1, MeasureMode::Unit).unwrap();
        assert_eq!(apply_laplacian(&t, &[1.0; 4]).unwrap(), vec![0.0, -2.0, -2.0, -2.0]);
        assert!(matches!(
            apply_laplacian(&t, &[1.0; 3]),
            Err(SpectralError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn zero_bottom_on_kill_free_graphs() {
        let c8 = gen_cycle(8).unwrap();
        let e = lambda1(&c8, 1e-8).unwrap();
        assert!(e.lambda1.abs() <= ABSOLUTE_FLOOR);
        let k2 = gen_complete(2).unwrap();
        assert!(lambda1(&k2, 1e-8).unwrap().lambda1 <= ABSOLUTE_FLOOR);
        let dense = symmetrized_matrix(&k2);
        let eig = SymmetricEigen::new(dense);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0]).abs() < 1e-15 && (ev[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lanczos_matches_dense() {
        for d in [
            gen_tree_ball(3, 5, MeasureMode::Unit).unwrap(),
            gen_tree_ball(4, 3, MeasureMode::Degree).unwrap(),
            gen_lattice_box(2, 6).unwrap(),
            gen_lattice_box(1, 30).unwrap(),
        ] {
            let l = lambda1_lanczos(&d, 1e-10, LanczosOptions::default()).unwrap();
            let dn = lambda1_dense(&d).unwrap();
            assert!(
                (l.lambda1 - dn.lambda1).abs() <= 1e-9 * dn.lambda1,
                "{} vs {}",
                l.lambda1,
                dn.lambda1
            );
            assert_eq!(l.method, EigenMethod::Lanczos);
        }
    }

    #[test]
    fn path_bottom_closed_form() {
        // Dirichlet path with 2R+1 interior sites: 2 − 2cos(π/(2R+2)).
        let r = 20;
        let d = gen_lattice_box(1, r).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (2.0 * r as f64 + 2.0)).cos();
        let e = lambda1(&d, 1e-11).unwrap();
        assert!((e.lambda1 - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn exhaustion_rejects_bad_radii() {
        let fam = GraphSpec::Tree {
            d: 3,
            radius: 1,
            mu: MeasureMode::Unit,
        };
        assert!(matches!(
            lambda1_exhaustion(&fam, &[5, 5], 1e-8),
            Err(SpectralError::InvalidParameter(_))
        ));
        assert!(lambda1_exhaustion(&GraphSpec::Cycle { n: 8 }, &[3, 4], 1e-8).is_err());
    }

    #[test]
    fn richardson_recovers_polynomial_tail() {
        let radii = [4.0, 5.0, 6.0, 7.0, 8.0];
        let vals: Vec<f64> = radii
            .iter()
            .map(|r: &f64| 0.5 + 3.0 / (r * r) - 2.0 / r.powi(3))
            .collect();
        let (l, _) = richardson_limit(&radii, &vals).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_tail_recovers_geometric_sequence() {
        let vals: Vec<f64> = (0..5).map(|k| 1.0 + 0.5f64.powi(k)).collect();
        assert!((geometric_tail_limit(&vals).unwrap() - 1.0).abs() < 1e-14);
        assert!(geometric_tail_limit(&[1.0, 2.0, 4.0]).is_none());
    }
}
