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

//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Lines go straight to stderr so they show up without `--nocapture`.

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use graphheat_cli::sweep::{dichotomy_sweep, write_sweep, SweepRow};
use graphheat_cli::output::Artifacts;
use graphheat_cli::ScenarioConfig;
use graphheat_core::blowup::{
    blowup_criterion, blowup_time_bound, envelope_constant, global_certificate, lower_bound_check, phi_ode_check,
    phi_series, CriterionVerdict,
};
use graphheat_core::mild::{global_bound_monitor, mol_reference_solve, solve, Problem, SolveOptions, Trajectory, Verdict};
use graphheat_core::source::SourceSpec;
use graphheat_core::spectral::{lambda1_dense, richardson_limit};
use graphheat_core::{
    gen_complete, gen_cycle, gen_lattice_box, gen_tree_ball, heat_kernel_column, kernel_decay_rate, lambda1,
    lambda1_exhaustion, validate_kernel, GraphSpec, MeasureMode, TruncatedDomain,
};
use nalgebra::DMatrix;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const SWEEP_CONFIG: &str = r#"
seed = 2024
[graph]
spec = "tree:d=3,r=8,mu=unit"
[datum]
kind = "kernel"
eps = 0.01
gamma = 1.0
[solver]
q = 2.0
horizon = 200.0
output_step = 0.5
[analysis]
gamma = 1.0
y0 = 0
[sweep]
alpha = [0.0, 0.05, 0.10, 0.25, 0.30, 0.40]
"#;

fn tree8() -> TruncatedDomain {
    gen_tree_ball(3, 8, MeasureMode::Unit).unwrap()
}

fn kernel_datum(d: &TruncatedDomain) -> Vec<f64> {
    heat_kernel_column(d, 0, &[1.0], 1e-10).unwrap().values[0].iter().map(|p| 0.01 * p).collect()
}

fn c1_kernel_closed_form() -> Check {
    let k2 = gen_complete(2).unwrap();
    let times = [0.1, 0.5, 2.0];
    let col = heat_kernel_column(&k2, 0, &times, 1e-10).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let e = (-2.0 * t).exp();
        worst = worst.max((col.values[k][0] - 0.5 * (1.0 + e)).abs());
        worst = worst.max((col.values[k][1] - 0.5 * (1.0 - e)).abs());
    }
    ensure(worst <= 1e-8, format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.2e}"))
}

fn c2_kernel_suite() -> Check {
    let domains: Vec<(&str, TruncatedDomain)> = vec![
        ("K2", gen_complete(2).unwrap()),
        ("C8", gen_cycle(8).unwrap()),
        ("lattice R=50", gen_lattice_box(1, 50).unwrap()),
        ("tree R=6", gen_tree_ball(3, 6, MeasureMode::Unit).unwrap()),
    ];
    let mut worst_sym: f64 = 0.0;
    let mut worst_sg: f64 = 0.0;
    for (name, d) in &domains {
        let n = d.n();
        let samples: Vec<usize> = [d.origin(), 1, n / 2, n - 1].into_iter().filter(|&v| v < n).collect();
        let rep = validate_kernel(d, &samples, &[0.1, 0.5, 1.0, 2.0], 1e-10).map_err(|e| e.to_string())?;
        ensure(rep.symmetry_residual <= 1e-8, format!("{name}: symmetry {:e}", rep.symmetry_residual))?;
        ensure(rep.mass_max <= 1.0 + 1e-10, format!("{name}: mass {}", rep.mass_max))?;
        if d.is_kill_free() {
            ensure((rep.mass_min - 1.0).abs() <= 1e-10, format!("{name}: mass {}", rep.mass_min))?;
        }
        ensure(rep.semigroup_residual <= 1e-6, format!("{name}: semigroup {:e}", rep.semigroup_residual))?;
        // Smallest kernel value over all pairs at t = 0.1.
        let min_p = (0..n)
            .map(|y| heat_kernel_column(d, y, &[0.1], 1e-10).unwrap().values[0].iter().cloned().fold(f64::MAX, f64::min))
            .fold(f64::MAX, f64::min);
        ensure(min_p > 0.0, format!("{name}: min kernel value {min_p:e} at t = 0.1"))?;
        worst_sym = worst_sym.max(rep.symmetry_residual);
        worst_sg = worst_sg.max(rep.semigroup_residual);
    }
    Ok(format!("symmetry {worst_sym:.1e}, semigroup {worst_sg:.1e}"))
}

/// Ground state energy of the radial Jacobi matrix of the tree ball.
fn radial_lambda1(d: usize, r: u32) -> f64 {
    let m = r as usize + 1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = d as f64;
        if i + 1 < m {
            let off = if i == 0 { (d as f64).sqrt() } else { ((d - 1) as f64).sqrt() };
            a[(i, i + 1)] = -off;
            a[(i + 1, i)] = -off;
        }
    }
    a.symmetric_eigen().eigenvalues.min()
}

fn c3_exhaustion() -> Check {
    let tol = 1e-10;
    let radii: Vec<u32> = (4..=12).collect();
    let family: GraphSpec = "tree:d=3,r=4,mu=unit".parse().unwrap();
    let ex = lambda1_exhaustion(&family, &radii, tol).map_err(|e| e.to_string())?;
    for w in ex.estimates.windows(2) {
        ensure(
            w[1].lambda1 <= w[0].lambda1 + 2.0 * tol * w[0].lambda1,
            format!("λ₁ rose from R = {} to R = {}", w[0].radius, w[1].radius),
        )?;
    }
    // Dense oracle: full dense solve where it fits, the radial reduction beyond.
    for r in 4..=8 {
        let dense = lambda1_dense(&gen_tree_ball(3, r, MeasureMode::Unit).unwrap()).map_err(|e| e.to_string())?;
        ensure((dense.lambda1 - radial_lambda1(3, r)).abs() <= 1e-10, format!("radial reduction off at R = {r}"))?;
    }
    let rs: Vec<f64> = radii.iter().map(|&r| r as f64).collect();
    let vs: Vec<f64> = radii.iter().map(|&r| radial_lambda1(3, r)).collect();
    let (oracle, _) = richardson_limit(&rs, &vs).ok_or("oracle extrapolation failed")?;
    ensure((ex.limit - oracle).abs() <= 1e-3, format!("limit {} vs oracle {oracle}", ex.limit))?;
    let exact = 3.0 - 2.0 * 2f64.sqrt();
    ensure((oracle - exact).abs() <= 1e-3, format!("oracle {oracle} vs 3 − 2√2"))?;
    Ok(format!("limit {:.6}, oracle {:.6}, 3−2√2 = {:.6}", ex.limit, oracle, exact))
}

fn c4_decay() -> Check {
    let d = tree8();
    let lam = lambda1(&d, 1e-10).map_err(|e| e.to_string())?.lambda1;
    let dec = kernel_decay_rate(&d, 0, 0, (20.0, 40.0), lam, 1e-10).map_err(|e| e.to_string())?;
    let rel = (dec.slope + lam).abs() / lam;
    ensure(rel <= 0.02, format!("slope {} vs {}", dec.slope, -lam))?;
    let c = envelope_constant(&d, 0, lam, 1e-10).map_err(|e| e.to_string())?;
    ensure(c.is_finite() && c > 0.0, format!("C̲ = {c}"))?;
    Ok(format!("slope {:.6} vs −λ₁ {:.6} (rel {rel:.1e}), C̲ = {c:.4}", dec.slope, -lam))
}

fn cycle_run(h: SourceSpec) -> Trajectory {
    let c8 = gen_cycle(8).unwrap();
    let p = Problem::new(&c8, 2.0, h, vec![1.0; 8], 5.0).unwrap();
    solve(&p, &SolveOptions::with_output_step(0.05, 5.0)).unwrap()
}

fn c5_ode_oracle() -> Check {
    let mut report = Vec::new();
    for (h, exact) in [
        (SourceSpec::constant(1.0).unwrap(), 1.0),
        (SourceSpec::exponential(0.5).unwrap(), 2.0 * 1.5f64.ln()),
    ] {
        let tr = cycle_run(h.clone());
        let Verdict::BlowupDetected { t_lo, t_hi } = tr.verdict else {
            return Err(format!("{h}: no blow-up"));
        };
        let slack = 0.01 * exact;
        ensure(t_hi - t_lo <= slack, format!("{h}: width {}", t_hi - t_lo))?;
        ensure(t_lo - slack <= exact && exact <= t_hi + slack, format!("{h}: [{t_lo}, {t_hi}] vs {exact}"))?;
        for f in &tr.fields {
            let (lo, hi) = f.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            ensure(hi - lo <= 1e-9 * hi.max(1.0), format!("{h}: spread {:e}", hi - lo))?;
        }
        report.push(format!("[{t_lo:.8}, {t_hi:.8}] vs {exact:.8}"));
    }
    Ok(report.join(", "))
}

fn last_uniform(tr: &Trajectory, dt: f64) -> usize {
    let mut k = 0;
    while k + 1 < tr.times.len() && (tr.times[k + 1] - (k + 1) as f64 * dt).abs() <= 1e-9 * dt.max(tr.times[k + 1]) {
        k += 1;
    }
    k
}

fn c6_blowup_bound(rows: &[SweepRow]) -> Check {
    let c8 = gen_cycle(8).unwrap();
    let mut worst: f64 = 0.0;
    for (h, u0, exact) in [
        (SourceSpec::constant(1.0).unwrap(), 1.0, 1.0),
        (SourceSpec::exponential(0.5).unwrap(), 1.0, 2.0 * 1.5f64.ln()),
        (SourceSpec::constant(1.0).unwrap(), 2.0, 0.5),
    ] {
        let tu = blowup_time_bound(&c8, &[u0; 8], 0, 2.0, &h, 100.0, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((tu - exact).abs() / exact);
        ensure((tu - exact).abs() <= 0.01 * exact, format!("{h}: T_upper {tu} vs {exact}"))?;
    }
    let blowups: Vec<&SweepRow> = rows.iter().filter(|r| r.verdict.as_ref().is_some_and(Verdict::is_blowup)).collect();
    ensure(!blowups.is_empty(), "no tree blow-up rows")?;
    for r in &blowups {
        let Some(Verdict::BlowupDetected { t_lo, .. }) = r.verdict else { unreachable!() };
        let tu = r.t_upper.ok_or(format!("alpha {}: no T_upper", r.alpha))?;
        ensure(t_lo <= 1.01 * tu, format!("alpha {}: t_lo {t_lo} > 1.01 T_upper {tu}", r.alpha))?;
    }
    // Φ inequality along the tree blow-up runs.
    let d = tree8();
    let u0 = kernel_datum(&d);
    let mut worst_phi = f64::NEG_INFINITY;
    for r in &blowups {
        let h = SourceSpec::exponential(r.alpha).unwrap();
        let p = Problem::new(&d, 2.0, h.clone(), u0.clone(), 200.0).unwrap();
        let tr = solve(&p, &SolveOptions::with_output_step(0.5, 200.0)).map_err(|e| e.to_string())?;
        let k = last_uniform(&tr, 0.5);
        let s = phi_series(&tr, &d, 0, tr.times[k], 1e-10, &h).map_err(|e| e.to_string())?;
        let chk = phi_ode_check(&s, &h, 2.0).map_err(|e| e.to_string())?;
        ensure(chk.max_violation <= 1e-3, format!("alpha {}: Φ violation {:e}", r.alpha, chk.max_violation))?;
        worst_phi = worst_phi.max(chk.max_violation);
    }
    Ok(format!("cycle T_upper rel error {worst:.1e}, {} tree blow-ups bounded, Φ violation {worst_phi:.1e}", blowups.len()))
}

fn c7_lower_bound() -> Check {
    let d = tree8();
    let lam = lambda1(&d, 1e-10).map_err(|e| e.to_string())?.lambda1;
    let mut u0 = vec![0.0; d.n()];
    u0[0] = 1.0;
    let grid: Vec<f64> = (1..=200).map(|i| 0.5 * i as f64).collect();
    let lb = lower_bound_check(&d, &u0, 0, 0.5 * lam, lam, &grid, 1e-10).map_err(|e| e.to_string())?;
    ensure(lb.holds, "bound fails at the end of the grid")?;
    Ok(format!("holds from t₀ = {} on [0.5, 100]", lb.t0.unwrap()))
}

fn c8_dichotomy(rows: &[SweepRow]) -> Check {
    let row = |a: f64| rows.iter().find(|r| (r.alpha - a).abs() < 1e-12).ok_or(format!("no row for alpha {a}"));
    for a in [0.30, 0.40] {
        let r = row(a)?;
        match r.verdict {
            Some(Verdict::BlowupDetected { t_lo, .. }) if t_lo < 200.0 => {}
            ref v => return Err(format!("alpha {a}: verdict {v:?}")),
        }
        ensure(
            matches!(r.criterion, Some(CriterionVerdict::Diverges { .. })),
            format!("alpha {a}: criterion {:?}", r.criterion),
        )?;
    }
    for a in [0.0, 0.05] {
        let r = row(a)?;
        ensure(r.certificate_granted == Some(true), format!("alpha {a}: certificate refuted"))?;
        ensure(r.verdict == Some(Verdict::CompletedHorizon), format!("alpha {a}: {:?}", r.verdict))?;
        ensure(r.envelope_holds == Some(true), format!("alpha {a}: envelope violated"))?;
    }
    // h ≡ 1 as a constant source at T = 100.
    let d = tree8();
    let u0 = kernel_datum(&d);
    let lam = lambda1(&d, 1e-10).map_err(|e| e.to_string())?.lambda1;
    let h = SourceSpec::constant(1.0).unwrap();
    let cert = global_certificate(&d, &u0, 2.0, &h, 1.0, 0, lam, 1e-10).map_err(|e| e.to_string())?;
    ensure(cert.granted, format!("h ≡ 1: refuted at {:?}", cert.first_failure))?;
    let p = Problem::new(&d, 2.0, h.clone(), u0, 100.0).unwrap();
    let opts = SolveOptions::with_output_step(0.5, 100.0);
    let tr = solve(&p, &opts).map_err(|e| e.to_string())?;
    ensure(tr.verdict == Verdict::CompletedHorizon, format!("h ≡ 1: {:?}", tr.verdict))?;
    let mon = global_bound_monitor(&tr, &d, 0, 1.0, cert.m_bound, 1e-10).map_err(|e| e.to_string())?;
    ensure(mon.holds, "h ≡ 1: envelope violated")?;
    let crit = blowup_criterion(&h, 2.0, rows[0].lambda1_graph).map_err(|e| e.to_string())?;
    ensure(crit.verdict == CriterionVerdict::Converges, "h ≡ 1: criterion does not converge")?;
    Ok("0.30, 0.40 blow up with diverging criterion; 0, 0.05 and h ≡ 1 certified and global".into())
}

fn c9_cross_validation(rows: &[SweepRow]) -> Check {
    let mut worst_d: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for r in rows {
        let c = r.max_contraction.ok_or(format!("alpha {}: {:?}", r.alpha, r.error))?;
        ensure(c <= 0.75, format!("alpha {}: contraction {c}", r.alpha))?;
        worst_c = worst_c.max(c);
        if r.verdict == Some(Verdict::CompletedHorizon) {
            let dist = r.mol_distance.ok_or("missing cross-check")?;
            ensure(dist <= 1e-4, format!("alpha {}: sup distance {dist:e}", r.alpha))?;
            worst_d = worst_d.max(dist);
        }
    }
    let d = tree8();
    let p = Problem::new(&d, 2.0, SourceSpec::constant(1.0).unwrap(), kernel_datum(&d), 100.0).unwrap();
    let opts = SolveOptions::with_output_step(0.5, 100.0);
    let a = solve(&p, &opts).map_err(|e| e.to_string())?;
    let b = mol_reference_solve(&p, &opts).map_err(|e| e.to_string())?;
    for (x, y) in a.fields.iter().zip(&b.fields) {
        for (u, v) in x.iter().zip(y) {
            worst_d = worst_d.max((u - v).abs());
        }
    }
    ensure(worst_d <= 1e-4, format!("h ≡ 1: sup distance {worst_d:e}"))?;
    for h in [SourceSpec::constant(1.0).unwrap(), SourceSpec::exponential(0.5).unwrap()] {
        let tr = cycle_run(h);
        worst_c = worst_c.max(tr.max_contraction());
    }
    ensure(worst_c <= 0.75, format!("contraction {worst_c}"))?;
    Ok(format!("sup distance {worst_d:.1e}, max contraction {worst_c:.3}"))
}

fn c10_determinism(cfg: &ScenarioConfig, first: &[SweepRow], summary: &graphheat_cli::SweepSummary) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut art = Artifacts::new(&a).map_err(|e| e.to_string())?;
    write_sweep(first, summary, &mut art).map_err(|e| e.to_string())?;
    let (rows2, summary2) = dichotomy_sweep(cfg, Some(3)).map_err(|e| e.to_string())?;
    let mut art = Artifacts::new(&b).map_err(|e| e.to_string())?;
    write_sweep(&rows2, &summary2, &mut art).map_err(|e| e.to_string())?;
    for f in ["dichotomy.csv", "dichotomy_summary.txt"] {
        let x = fs::read(a.join(f)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, format!("{f} differs between runs"))?;
    }
    Ok(format!("{} rows byte-identical across runs with 1 and 3 workers", rows2.len()))
}

fn record(results: &mut Vec<bool>, n: usize, name: &str, f: impl FnOnce() -> Check) {
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(_) => Err("panicked".into()),
    };
    let line = match &outcome {
        Ok(detail) => format!("acceptance {n:>2} PASS {name}: {detail}"),
        Err(why) => format!("acceptance {n:>2} FAIL {name}: {why}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    results.push(outcome.is_ok());
}

#[test]
fn acceptance_criteria() {
    let cfg = ScenarioConfig::parse(SWEEP_CONFIG).unwrap();
    let (rows, summary) = dichotomy_sweep(&cfg, Some(1)).unwrap();
    let _ = writeln!(
        std::io::stderr(),
        "dichotomy: transition in ({:?}, {:?}), (q−1)λ₁(B₈) = {:.6}, (q−1)λ₁(G) = {:.6}",
        summary.transition.0,
        summary.transition.1,
        summary.threshold_domain,
        summary.threshold_graph
    );
    let mut results = Vec::new();
    record(&mut results, 1, "kernel closed form", c1_kernel_closed_form);
    record(&mut results, 2, "kernel symmetry, mass, semigroup, positivity", c2_kernel_suite);
    record(&mut results, 3, "spectral exhaustion", c3_exhaustion);
    record(&mut results, 4, "kernel decay rate", c4_decay);
    record(&mut results, 5, "scalar ODE blow-up", c5_ode_oracle);
    record(&mut results, 6, "blow-up time bound", || c6_blowup_bound(&rows));
    record(&mut results, 7, "heat lower bound", c7_lower_bound);
    record(&mut results, 8, "dichotomy sweep", || c8_dichotomy(&rows));
    record(&mut results, 9, "solver cross-validation", || c9_cross_validation(&rows));
    record(&mut results, 10, "determinism", || c10_determinism(&cfg, &rows, &summary));
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
