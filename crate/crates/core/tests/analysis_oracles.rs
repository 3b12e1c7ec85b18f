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

//! Φ functional, blow-up time bound, heat lower bound, growth criterion and
//! global-existence certificate on closed-form cases.

use graphheat_core::blowup::{
    blowup_criterion, blowup_time_bound, blowup_time_bound_over, cumulative_h, default_probes, global_certificate,
    h_tilde, lower_bound_check, phi_ode_check, phi_series, BlowupError, CertificateCheck, CriterionVerdict,
};
use graphheat_core::mild::{solve, Problem, SolveOptions};
use graphheat_core::source::SourceSpec;
use graphheat_core::{gen_complete, gen_cycle, gen_tree_ball, heat_apply, heat_kernel_column, lambda1, MeasureMode};

const TREE_LIMIT: f64 = 0.171573;

#[test]
fn cumulative_source_examples() {
    let one = SourceSpec::constant(1.0).unwrap();
    let exp = SourceSpec::exponential(0.5).unwrap();
    assert_eq!(cumulative_h(&one, 1.0), 1.0);
    assert!((cumulative_h(&exp, 2.0) - (1f64.exp() - 1.0) / 0.5).abs() < 1e-12);
    assert_eq!(cumulative_h(&exp, 0.0), 0.0);
}

#[test]
fn discounted_total_examples() {
    let one = SourceSpec::constant(1.0).unwrap();
    assert!((h_tilde(&one, TREE_LIMIT, 2.0) - 5.82843).abs() < 1e-4);
    let slow = SourceSpec::exponential(0.05).unwrap();
    assert!((h_tilde(&slow, TREE_LIMIT, 2.0) - 8.22551).abs() < 1e-4);
    let fast = SourceSpec::exponential(0.3).unwrap();
    assert_eq!(h_tilde(&fast, TREE_LIMIT, 2.0), f64::INFINITY);
}

#[test]
fn criterion_examples() {
    let fast = blowup_criterion(&SourceSpec::exponential(0.4).unwrap(), 2.0, TREE_LIMIT).unwrap();
    assert_eq!(fast.verdict, CriterionVerdict::Diverges { eps: TREE_LIMIT / 8.0 });
    let slow = blowup_criterion(&SourceSpec::exponential(0.05).unwrap(), 2.0, TREE_LIMIT).unwrap();
    assert_eq!(slow.verdict, CriterionVerdict::Converges);
    for lam in [0.01, TREE_LIMIT, 2.0] {
        let c = blowup_criterion(&SourceSpec::constant(1.0).unwrap(), 2.0, lam).unwrap();
        assert_eq!(c.verdict, CriterionVerdict::Converges);
    }
    let edge = blowup_criterion(&SourceSpec::exponential(TREE_LIMIT * 1.125 + 5e-4).unwrap(), 2.0, TREE_LIMIT).unwrap();
    assert_eq!(edge.verdict, CriterionVerdict::Inconclusive);
}

#[test]
fn phi_on_constant_cycle_run() {
    let c8 = gen_cycle(8).unwrap();
    let h = SourceSpec::constant(1.0).unwrap();
    let p = Problem::new(&c8, 2.0, h.clone(), vec![1.0; 8], 0.5).unwrap();
    let tr = solve(&p, &SolveOptions::with_output_step(0.05, 0.5)).unwrap();
    let s = phi_series(&tr, &c8, 3, 0.5, 1e-10, &h).unwrap();
    for (&t, &v) in s.times.iter().zip(&s.values) {
        assert!((v - 1.0 / (1.0 - t)).abs() <= 1e-6, "Φ({t}) = {v}");
    }
    assert!(s.identity_residual <= 1e-6);
    let chk = phi_ode_check(&s, &h, 2.0).unwrap();
    assert!(chk.max_violation.abs() <= 1e-4, "{}", chk.max_violation);
}

#[test]
fn phi_of_zero_solution_vanishes() {
    let c8 = gen_cycle(8).unwrap();
    let h = SourceSpec::constant(1.0).unwrap();
    let p = Problem::new(&c8, 2.0, h.clone(), vec![0.0; 8], 1.0).unwrap();
    let tr = solve(&p, &SolveOptions::with_output_step(0.25, 1.0)).unwrap();
    let s = phi_series(&tr, &c8, 0, 1.0, 1e-10, &h).unwrap();
    assert!(s.values.iter().all(|&v| v == 0.0));
    assert_eq!(phi_ode_check(&s, &h, 2.0).unwrap().max_violation, 0.0);
}

#[test]
fn phi_on_tree_blowup_run() {
    let d = gen_tree_ball(3, 5, MeasureMode::Unit).unwrap();
    let h = SourceSpec::exponential(0.4).unwrap();
    let u0: Vec<f64> = heat_kernel_column(&d, 0, &[1.0], 1e-10).unwrap().values[0].iter().map(|v| 0.5 * v).collect();
    let p = Problem::new(&d, 2.0, h.clone(), u0.clone(), 50.0).unwrap();
    let tr = solve(&p, &SolveOptions::with_output_step(0.25, 50.0)).unwrap();
    assert!(tr.verdict.is_blowup());
    let k = tr.times.len() - 2;
    let t_final = tr.times[k];
    let s = phi_series(&tr, &d, 0, t_final, 1e-10, &h).unwrap();
    // Φ(0) against a separate propagation of the datum.
    let direct = heat_apply(&d, &u0, t_final, 1e-11).unwrap()[0];
    assert!((s.values[0] - direct).abs() <= 1e-6 * direct);
    let chk = phi_ode_check(&s, &h, 2.0).unwrap();
    assert!(chk.max_violation <= 1e-3, "{}", chk.max_violation);
    assert!(chk.max_decrease <= 1e-6);
}

#[test]
fn blowup_time_bound_examples() {
    let c8 = gen_cycle(8).unwrap();
    let one = SourceSpec::constant(1.0).unwrap();
    let t = blowup_time_bound(&c8, &[1.0; 8], 2, 2.0, &one, 100.0, 1e-10).unwrap();
    assert!((t - 1.0).abs() <= 1e-6);
    let exp = SourceSpec::exponential(0.5).unwrap();
    let t = blowup_time_bound(&c8, &[1.0; 8], 0, 2.0, &exp, 100.0, 1e-10).unwrap();
    assert!((t - 2.0 * 1.5f64.ln()).abs() <= 1e-6 * t);
    let t = blowup_time_bound(&c8, &[2.0; 8], 0, 2.0, &one, 100.0, 1e-10).unwrap();
    assert!((t - 0.5).abs() <= 1e-6);
    let e = blowup_time_bound(&c8, &[1e-3; 8], 0, 2.0, &one, 10.0, 1e-10).unwrap_err();
    assert_eq!(e, BlowupError::NoBoundInHorizon { cap: 10.0 });
}

#[test]
fn scaling_law_on_the_tree() {
    let d = gen_tree_ball(3, 5, MeasureMode::Unit).unwrap();
    let one = SourceSpec::constant(1.0).unwrap();
    let u0: Vec<f64> = (0..d.n()).map(|x| if x < 4 { 2.0 } else { 0.5 }).collect();
    let u1: Vec<f64> = u0.iter().map(|v| 2.0 * v).collect();
    let a = heat_apply(&d, &u0, 0.7, 1e-12).unwrap();
    let b = heat_apply(&d, &u1, 0.7, 1e-12).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((y - 2.0 * x).abs() <= 1e-14 * y.abs().max(1.0));
    }
    let probes = default_probes(&d);
    let (t0, x0) = blowup_time_bound_over(&d, &u0, &probes, 2.0, &one, 100.0, 1e-10).unwrap();
    let (t1, _) = blowup_time_bound_over(&d, &u1, &probes, 2.0, &one, 100.0, 1e-10).unwrap();
    // q = 2: H(T) (e^{TΔ}u)(x) = 1, so doubling u solves H(T) (e^{TΔ}u₀)(x) = 1/2.
    let prod = |t: f64, u: &[f64]| t * heat_apply(&d, u, t, 1e-12).unwrap()[x0];
    assert!((prod(t0, &u0) - 1.0).abs() <= 1e-5);
    assert!((prod(t1, &u0) - 0.5).abs() <= 1e-5);
    assert!(t1 < t0);
}

#[test]
fn heat_lower_bound_examples() {
    let k2 = gen_complete(2).unwrap();
    let grid: Vec<f64> = (1..=400).map(|i| 0.5 * i as f64).collect();
    let lb = lower_bound_check(&k2, &[1.0, 0.0], 0, 0.01, 0.0, &grid, 1e-10).unwrap();
    // (1 + e^{−2t})/2 ≥ e^{−t/100} first holds just past t = 100 ln 2.
    assert!(lb.holds);
    assert_eq!(lb.t0, Some(69.5));

    let d = gen_tree_ball(3, 8, MeasureMode::Unit).unwrap();
    let lam = lambda1(&d, 1e-10).unwrap().lambda1;
    let mut u0 = vec![0.0; d.n()];
    u0[0] = 1.0;
    let grid: Vec<f64> = (1..=200).map(|i| 0.5 * i as f64).collect();
    let lb = lower_bound_check(&d, &u0, 0, 0.5 * lam, lam, &grid, 1e-10).unwrap();
    assert!(lb.holds);
    assert!(lb.t0.unwrap() < 100.0);
    assert_eq!(lb.c1, 1.0);

    let e = lower_bound_check(&d, &u0, 1, 0.5 * lam, lam, &grid, 1e-10).unwrap_err();
    assert!(matches!(e, BlowupError::InvalidInput(_)));
}

#[test]
fn certificate_examples() {
    let d = gen_tree_ball(3, 8, MeasureMode::Unit).unwrap();
    let lam_ball = lambda1(&d, 1e-10).unwrap().lambda1;
    let zero = vec![0.0; d.n()];
    let slow = SourceSpec::exponential(0.05).unwrap();
    let c = global_certificate(&d, &zero, 2.0, &slow, 1.0, 0, lam_ball, 1e-10).unwrap();
    assert!(c.granted);

    let u0: Vec<f64> = heat_kernel_column(&d, 0, &[1.0], 1e-10).unwrap().values[0].iter().map(|v| 0.01 * v).collect();
    let c = global_certificate(&d, &u0, 2.0, &slow, 1.0, 0, TREE_LIMIT, 1e-10).unwrap();
    assert!((c.h_tilde - 8.22551).abs() < 1e-4);
    assert!(c.granted, "{:?}", c.first_failure);
    assert!(2.0 * c.delta * c.h_tilde < 1.0 && c.delta < 0.0608);
    assert!(c.checks.iter().all(|&(_, ok)| ok));

    let fast = SourceSpec::exponential(0.3).unwrap();
    let c = global_certificate(&d, &u0, 2.0, &fast, 1.0, 0, TREE_LIMIT, 1e-10).unwrap();
    assert!(!c.granted);
    assert_eq!(c.first_failure, Some(CertificateCheck::DeltaPowerBelowOne));
}
