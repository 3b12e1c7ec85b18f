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

//! Subcommand bodies. Each writes its artifacts plus `manifest.json` into
//! the output directory and returns the `key=value` lines it printed.

use std::path::PathBuf;

use graphheat_core::blowup::{
    blowup_criterion, blowup_time_bound_over, default_probes, global_certificate, lower_bound_check, phi_ode_check,
    phi_series, BlowupError, CriterionVerdict,
};
use graphheat_core::mild::{global_bound_monitor, mol_reference_solve, solve, Trajectory, Verdict};
use graphheat_core::spectral::{ExtrapolationModel, ABSOLUTE_FLOOR};
use graphheat_core::{
    heat_kernel_column, lambda1, lambda1_exhaustion, save_graph, validate_kernel, SpectralError, TruncatedDomain,
};

use crate::config::ScenarioConfig;
use crate::output::{opt_real, real, Artifacts};
use crate::report::{report, CheckRow, REPORT_HEADER};
use crate::scenario::{
    anchor, build_datum, build_domain, domain_lambda1, graph_lambda1, problem, sample_vertices, solve_options,
    SPECTRAL_TOL,
};
use crate::sweep::{dichotomy_sweep, summary_text, write_sweep, BOUND_SLACK, CONTRACTION_LIMIT, CROSS_CHECK_TOL};
use crate::{CliError, Outcome};

/// Kernel validation thresholds.
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-10;
pub const SEMIGROUP_TOL: f64 = 1e-6;
/// Relative tolerance of the fitted decay slope.
pub const DECAY_TOL: f64 = 0.02;
pub const PHI_VIOLATION_TOL: f64 = 1e-3;
pub const PHI_IDENTITY_TOL: f64 = 1e-6;
/// Grid of the heat lower-bound check.
const LOWER_BOUND_GRID: (f64, f64) = (0.5, 100.0);

/// Resolved inputs shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ScenarioConfig,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

impl Context {
    fn artifacts(&self) -> Result<Artifacts, CliError> {
        Artifacts::new(&self.out)
    }

    fn finish(&self, mut art: Artifacts, name: &str, outcome: &Outcome) -> Result<(), CliError> {
        let mut text = outcome.lines.join("\n");
        text.push('\n');
        art.write_text(&format!("{name}.txt"), &text)?;
        art.finish(name, self.cfg.seed)?;
        Ok(())
    }
}

pub fn gen_graph(ctx: &Context) -> Result<Outcome, CliError> {
    let domain = build_domain(&ctx.cfg)?;
    let mut art = ctx.artifacts()?;
    save_graph(&domain, art.path("graph.txt"))?;
    art.record("graph.txt");
    let mut out = Outcome::new();
    out.kv("graph", ctx.cfg.graph.label());
    out.kv("vertices", domain.n());
    out.kv("edges", domain.graph().edges().len());
    out.kv("origin", domain.origin());
    out.kv("radius", domain.radius());
    out.kv("kill_free", domain.is_kill_free());
    out.kv("fingerprint", format!("{:016x}", domain.fingerprint()));
    ctx.finish(art, "gen-graph", &out)?;
    Ok(out)
}

/// `λ₁` per radius of the configured family, or of the single domain.
pub fn lambda1_cmd(ctx: &Context, radii: Option<Vec<u32>>, tol: f64) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let mut out = Outcome::new();
    let mut art = ctx.artifacts()?;
    let header = ["radius", "lambda1", "residual", "iterations"];
    let family = cfg.graph.family().filter(|s| s.with_radius(1).is_ok());
    match family {
        Some(spec) => {
            let radii = radii
                .or_else(|| cfg.sweep_radii.clone())
                .unwrap_or_else(|| cfg.exhaustion_radii.clone());
            match lambda1_exhaustion(spec, &radii, tol) {
                Ok(ex) => {
                    let rows: Vec<Vec<String>> = ex
                        .estimates
                        .iter()
                        .map(|e| {
                            vec![
                                e.radius.to_string(),
                                real(e.lambda1),
                                real(e.residual),
                                e.iterations.to_string(),
                            ]
                        })
                        .collect();
                    art.write_csv("lambda1.csv", &header, &rows)?;
                    out.kv("family", spec);
                    out.kv("limit", real(ex.limit));
                    out.kv(
                        "model",
                        match ex.model {
                            ExtrapolationModel::Richardson => "richardson",
                            ExtrapolationModel::GeometricTail => "geometric",
                            ExtrapolationModel::LastValue => "last_value",
                        },
                    );
                    out.kv("fit_residual", real(ex.fit_residual));
                    out.kv("geometric_limit", opt_real(ex.geometric_limit));
                    out.check("monotone_in_radius", true);
                }
                Err(e @ SpectralError::MonotonicityViolation { .. }) => {
                    out.kv("error", e);
                    out.check("monotone_in_radius", false);
                }
                Err(e) => return Err(e.into()),
            }
        }
        None => {
            let domain = build_domain(cfg)?;
            let e = lambda1(&domain, tol)?;
            art.write_csv(
                "lambda1.csv",
                &header,
                &[vec![
                    e.radius.to_string(),
                    real(e.lambda1),
                    real(e.residual),
                    e.iterations.to_string(),
                ]],
            )?;
            out.kv("graph", cfg.graph.label());
            out.kv("lambda1", real(e.lambda1));
        }
    }
    ctx.finish(art, "lambda1", &out)?;
    Ok(out)
}

fn kernel_checks(out: &mut Outcome, domain: &TruncatedDomain, samples: &[usize], times: &[f64], tol: f64) -> Result<Vec<CheckRow>, CliError> {
    let rep = validate_kernel(domain, samples, times, tol)?;
    out.kv("symmetry_residual", real(rep.symmetry_residual));
    out.kv("mass_max", real(rep.mass_max));
    out.kv("mass_min", real(rep.mass_min));
    out.kv("mass_increase", real(rep.mass_increase));
    out.kv("semigroup_residual", real(rep.semigroup_residual));
    out.kv("positivity_min", real(rep.positivity_min));
    out.kv("decay_slope", real(rep.decay_slope));
    out.kv("decay_slope_target", real(rep.decay_slope_target));
    out.kv("envelope_constant", real(rep.envelope_constant));
    let scenario = format!("n={}", domain.n());
    let mut rows = vec![
        CheckRow::at_most("kernel_symmetry", &scenario, rep.symmetry_residual, SYMMETRY_TOL),
        CheckRow::at_most("kernel_mass_bound", &scenario, rep.mass_max, 1.0 + MASS_TOL),
        CheckRow::at_most("kernel_semigroup", &scenario, rep.semigroup_residual, SEMIGROUP_TOL),
        CheckRow::above("kernel_positivity", &scenario, rep.positivity_min, 0.0),
    ];
    if domain.is_kill_free() {
        rows.push(CheckRow::at_most(
            "kernel_mass_conserved",
            &scenario,
            (1.0 - rep.mass_min).abs().max((rep.mass_max - 1.0).abs()),
            MASS_TOL,
        ));
    }
    Ok(rows)
}

/// Kernel columns `p(·, y0, t)`; with `validate`, the semigroup checks.
pub fn kernel_cmd(
    ctx: &Context,
    source: Option<usize>,
    times: Option<Vec<f64>>,
    validate: bool,
    tol: f64,
) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let domain = build_domain(cfg)?;
    let y0 = match source {
        Some(v) if v >= domain.n() => {
            return Err(CliError::Usage(format!("--source {v} out of range for {} vertices", domain.n())))
        }
        Some(v) => v,
        None => anchor(cfg, &domain)?,
    };
    let mut times = times.unwrap_or_else(|| cfg.kernel_times.clone());
    times.sort_by(f64::total_cmp);
    times.dedup();
    let col = heat_kernel_column(&domain, y0, &times, tol)?;
    let mut rows = Vec::with_capacity(times.len() * domain.n());
    for (k, &t) in times.iter().enumerate() {
        for (x, p) in col.values[k].iter().enumerate() {
            rows.push(vec![real(t), x.to_string(), real(*p), real(col.mass[k])]);
        }
    }
    let mut art = ctx.artifacts()?;
    art.write_csv("kernel.csv", &["t", "vertex", "p", "mass"], &rows)?;
    let mut out = Outcome::new();
    out.kv("graph", cfg.graph.label());
    out.kv("source", y0);
    if validate {
        let samples = sample_vertices(&domain, cfg.samples, cfg.seed);
        out.kv(
            "samples",
            samples.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
        );
        for row in kernel_checks(&mut out, &domain, &samples, &times, tol)? {
            out.check(&row.check, row.passed);
        }
    }
    ctx.finish(art, "kernel", &out)?;
    Ok(out)
}

fn verdict_line(v: &Verdict, horizon: f64) -> String {
    match v {
        Verdict::CompletedHorizon => format!("verdict=completed t_lo={} t_hi=inf", real(horizon)),
        Verdict::BlowupDetected { t_lo, t_hi } => format!("verdict=blowup t_lo={} t_hi={}", real(*t_lo), real(*t_hi)),
        Verdict::SolverFailure { t, .. } => format!("verdict=failure t_lo={} t_hi=nan", real(*t)),
    }
}

pub fn solve_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let domain = build_domain(cfg)?;
    let u0 = build_datum(cfg, &domain)?;
    let y0 = anchor(cfg, &domain)?;
    let prob = problem(cfg, &domain, cfg.source.clone(), u0)?;
    let traj = solve(&prob, &solve_options(cfg))?;
    let mon = global_bound_monitor(&traj, &domain, y0, cfg.gamma, 1.0, cfg.heat_tol)?;
    let rows: Vec<Vec<String>> = (0..traj.times.len())
        .map(|k| {
            vec![
                real(traj.times[k]),
                real(traj.supnorm[k]),
                real(traj.mass[k]),
                real(mon.ratios[k]),
            ]
        })
        .collect();
    let mut art = ctx.artifacts()?;
    art.write_csv("trajectory.csv", &["t", "supnorm", "mass", "ratio"], &rows)?;
    for &t in &cfg.dump_times {
        if let Some(k) = traj.index_of(t) {
            let rows: Vec<Vec<String>> = traj.fields[k]
                .iter()
                .enumerate()
                .map(|(x, u)| vec![x.to_string(), real(*u)])
                .collect();
            art.write_csv(&format!("field_t{t}.csv"), &["vertex", "u"], &rows)?;
        }
    }
    let line = verdict_line(&traj.verdict, cfg.horizon);
    art.write_text("verdict.txt", &format!("{line}\n"))?;
    let mut out = Outcome::new();
    out.lines.push(line);
    if let Verdict::SolverFailure { reason, .. } = &traj.verdict {
        out.kv("reason", reason);
    }
    out.kv("slabs", traj.slabs.len());
    out.kv("max_contraction", real(traj.max_contraction()));
    out.kv("final_supnorm", real(*traj.supnorm.last().unwrap()));
    out.check("solver_completed_or_blowup", !matches!(traj.verdict, Verdict::SolverFailure { .. }));
    out.check("slab_contraction", traj.max_contraction() <= CONTRACTION_LIMIT);
    ctx.finish(art, "solve", &out)?;
    Ok(out)
}

/// Last index `k` such that `times[..=k]` is the uniform grid `0, dt, 2dt, …`.
fn uniform_prefix(times: &[f64], dt: f64) -> usize {
    let mut k = 0;
    while k + 1 < times.len() && (times[k + 1] - (k + 1) as f64 * dt).abs() <= 1e-9 * dt.max(times[k + 1]) {
        k += 1;
    }
    k
}

struct PhiOutcome {
    t_final: f64,
    probe: usize,
    violation: f64,
    identity: f64,
    rows: Vec<Vec<String>>,
}

fn phi_for(
    cfg: &ScenarioConfig,
    domain: &TruncatedDomain,
    traj: &Trajectory,
    probe: usize,
) -> Result<Option<PhiOutcome>, CliError> {
    let k = uniform_prefix(&traj.times, cfg.output_step);
    if k < 2 {
        return Ok(None);
    }
    let t_final = traj.times[k];
    let series = phi_series(traj, domain, probe, t_final, cfg.heat_tol, &cfg.source)?;
    let chk = phi_ode_check(&series, &cfg.source, cfg.q)?;
    let rows = series
        .times
        .iter()
        .zip(&series.values)
        .zip(&series.h_values)
        .map(|((t, v), h)| vec![real(*t), real(*v), real(*h)])
        .collect();
    Ok(Some(PhiOutcome {
        t_final,
        probe,
        violation: chk.max_violation,
        identity: series.identity_residual,
        rows,
    }))
}

/// Upper bound on the blow-up time against the solver, plus `Φ` checks.
pub fn bound_check(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let domain = build_domain(cfg)?;
    let u0 = build_datum(cfg, &domain)?;
    let probes = default_probes(&domain);
    let bound = match blowup_time_bound_over(&domain, &u0, &probes, cfg.q, &cfg.source, cfg.bound_cap, cfg.heat_tol) {
        Ok(b) => Some(b),
        Err(BlowupError::NoBoundInHorizon { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let prob = problem(cfg, &domain, cfg.source.clone(), u0)?;
    let traj = solve(&prob, &solve_options(cfg))?;
    let mut out = Outcome::new();
    out.kv("t_upper", opt_real(bound.map(|b| b.0)));
    out.kv("probe", bound.map(|b| b.1.to_string()).unwrap_or_default());
    out.lines.push(verdict_line(&traj.verdict, cfg.horizon));
    let mut art = ctx.artifacts()?;
    if let (Verdict::BlowupDetected { t_lo, .. }, Some((tu, _))) = (&traj.verdict, bound) {
        out.kv("t_lo_over_t_upper", real(t_lo / tu));
        out.check("blowup_before_upper_bound", *t_lo <= BOUND_SLACK * tu);
    }
    let probe = bound.map(|b| b.1).unwrap_or(domain.origin());
    if let Some(phi) = phi_for(cfg, &domain, &traj, probe)? {
        art.write_csv("phi.csv", &["t", "phi", "H"], &phi.rows)?;
        out.kv("phi_probe", phi.probe);
        out.kv("phi_t_final", real(phi.t_final));
        out.kv("phi_identity_residual", real(phi.identity));
        out.kv("phi_ode_violation", real(phi.violation));
        out.check("phi_identity", phi.identity <= PHI_IDENTITY_TOL);
        out.check("phi_ode_inequality", phi.violation <= PHI_VIOLATION_TOL);
    }
    ctx.finish(art, "bound-check", &out)?;
    Ok(out)
}

/// Global-existence certificate; when granted, the envelope is monitored
/// along a solve.
pub fn certify(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let domain = build_domain(cfg)?;
    let u0 = build_datum(cfg, &domain)?;
    let y0 = anchor(cfg, &domain)?;
    let lam = domain_lambda1(cfg, &domain)?;
    let cert = global_certificate(&domain, &u0, cfg.q, &cfg.source, cfg.gamma, y0, lam, cfg.heat_tol)?;
    let mut out = Outcome::new();
    out.kv("lambda1", real(cert.lambda1));
    out.kv("h_tilde", real(cert.h_tilde));
    out.kv("c_lower", real(cert.c_lower));
    out.kv("delta", real(cert.delta));
    out.kv("m_bound", real(cert.m_bound));
    out.kv("epsilon", real(cert.epsilon));
    out.kv("gamma", real(cert.gamma));
    out.kv("y0", cert.y0);
    for (c, ok) in &cert.checks {
        out.kv(&format!("hypothesis.{}", c.name()), ok);
    }
    out.kv("certificate", if cert.granted { "granted" } else { "refuted" });
    out.kv("first_failure", cert.first_failure.map(|c| c.name()).unwrap_or(""));
    let mut art = ctx.artifacts()?;
    let rows: Vec<Vec<String>> = cert
        .checks
        .iter()
        .map(|(c, ok)| vec![c.name().to_string(), ok.to_string()])
        .collect();
    art.write_csv("certificate.csv", &["hypothesis", "holds"], &rows)?;
    if cert.granted {
        let prob = problem(cfg, &domain, cfg.source.clone(), u0)?;
        let traj = solve(&prob, &solve_options(cfg))?;
        out.lines.push(verdict_line(&traj.verdict, cfg.horizon));
        let mon = global_bound_monitor(&traj, &domain, y0, cfg.gamma, cert.m_bound, cfg.heat_tol)?;
        let rows: Vec<Vec<String>> = mon
            .times
            .iter()
            .zip(&mon.ratios)
            .map(|(t, r)| vec![real(*t), real(*r), real(mon.bound)])
            .collect();
        art.write_csv("envelope.csv", &["t", "ratio", "bound"], &rows)?;
        out.check("granted_run_completes", matches!(traj.verdict, Verdict::CompletedHorizon));
        out.check("global_envelope", mon.holds);
    }
    ctx.finish(art, "certify", &out)?;
    Ok(out)
}

/// Growth criterion with the whole-graph `λ₁`.
pub fn criterion(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let domain = build_domain(cfg)?;
    let lam = graph_lambda1(cfg, &domain)?;
    let res = blowup_criterion(&cfg.source, cfg.q, lam)?;
    let mut out = Outcome::new();
    out.kv("lambda1", real(lam));
    out.kv("growth_rate", real(res.growth_rate));
    out.kv("criterion", res.verdict);
    if let CriterionVerdict::Diverges { eps } = res.verdict {
        out.kv("eps", real(eps));
    }
    let rows: Vec<Vec<String>> = res
        .eps_grid
        .iter()
        .map(|&e| {
            vec![
                real(e),
                real(lam + e),
                real(res.growth_rate),
                real(res.growth_rate - (lam + e)),
            ]
        })
        .collect();
    let mut art = ctx.artifacts()?;
    art.write_csv("criterion.csv", &["eps", "threshold", "growth_rate", "margin"], &rows)?;
    ctx.finish(art, "criterion", &out)?;
    Ok(out)
}

pub fn dichotomy(ctx: &Context) -> Result<Outcome, CliError> {
    let (rows, summary) = dichotomy_sweep(&ctx.cfg, ctx.jobs)?;
    for r in &rows {
        eprintln!("alpha={} seconds={:.2}", r.alpha, r.seconds);
    }
    let mut art = ctx.artifacts()?;
    write_sweep(&rows, &summary, &mut art)?;
    let mut out = Outcome::new();
    out.lines.extend(summary_text(&summary).lines().map(String::from));
    for r in rows.iter().filter(|r| !r.consistent) {
        out.kv(
            &format!("inconsistent.alpha={}", r.alpha),
            r.error.clone().unwrap_or_else(|| "check failed".into()),
        );
    }
    out.check("sweep_consistent", summary.all_consistent());
    ctx.finish(art, "dichotomy", &out)?;
    Ok(out)
}

/// Every check applicable to the configured scenario.
pub fn scenario_checks(cfg: &ScenarioConfig) -> Result<Vec<CheckRow>, CliError> {
    let domain = build_domain(cfg)?;
    let scenario = format!("{} {}", cfg.graph.label(), cfg.source);
    let mut scratch = Outcome::new();
    let samples = sample_vertices(&domain, cfg.samples, cfg.seed);
    let mut rows: Vec<CheckRow> = kernel_checks(&mut scratch, &domain, &samples, &cfg.kernel_times, cfg.heat_tol)?
        .into_iter()
        .map(|mut r| {
            r.scenario = scenario.clone();
            r
        })
        .collect();

    let lam = lambda1(&domain, SPECTRAL_TOL)?.lambda1;
    if lam > ABSOLUTE_FLOOR {
        let dec = graphheat_core::kernel_decay_rate(
            &domain,
            domain.origin(),
            domain.origin(),
            graphheat_core::heat::DECAY_WINDOW,
            lam,
            cfg.heat_tol,
        )?;
        rows.push(CheckRow::at_most("kernel_decay", &scenario, (dec.slope + lam).abs() / lam, DECAY_TOL));
    }

    let u0 = build_datum(cfg, &domain)?;
    let x0 = (0..domain.n()).fold(0, |b, x| if u0[x] > u0[b] { x } else { b });
    // The bound needs 0 < ε < λ₁, so domains without a spectral gap skip it.
    if u0[x0] > 0.0 && lam > ABSOLUTE_FLOOR {
        let (a, b) = LOWER_BOUND_GRID;
        let grid: Vec<f64> = (1..=(b / a).round() as usize).map(|i| i as f64 * a).collect();
        let lb = lower_bound_check(&domain, &u0, x0, 0.5 * lam, lam, &grid, cfg.heat_tol)?;
        rows.push(CheckRow::holds("heat_lower_bound", &scenario, lb.holds));
    }

    let prob = problem(cfg, &domain, cfg.source.clone(), u0.clone())?;
    let opts = solve_options(cfg);
    let traj = solve(&prob, &opts)?;
    rows.push(CheckRow::holds(
        "solver_no_failure",
        &scenario,
        !matches!(traj.verdict, Verdict::SolverFailure { .. }),
    ));
    rows.push(CheckRow::at_most("slab_contraction", &scenario, traj.max_contraction(), CONTRACTION_LIMIT));
    let probes = default_probes(&domain);
    let bound = match blowup_time_bound_over(&domain, &u0, &probes, cfg.q, &cfg.source, cfg.bound_cap, cfg.heat_tol) {
        Ok(b) => Some(b),
        Err(BlowupError::NoBoundInHorizon { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    match &traj.verdict {
        Verdict::BlowupDetected { t_lo, .. } => {
            if let Some((tu, _)) = bound {
                rows.push(CheckRow::at_most("blowup_time_bound", &scenario, t_lo / tu, BOUND_SLACK));
            }
        }
        Verdict::CompletedHorizon => {
            let mol = mol_reference_solve(&prob, &opts)?;
            let mut d: f64 = 0.0;
            for (k, &t) in traj.times.iter().enumerate() {
                if let Some(j) = mol.index_of(t) {
                    for (x, y) in traj.fields[k].iter().zip(&mol.fields[j]) {
                        d = d.max((x - y).abs());
                    }
                }
            }
            rows.push(CheckRow::at_most("mol_cross_check", &scenario, d, CROSS_CHECK_TOL));
            if lam > ABSOLUTE_FLOOR {
                let y0 = anchor(cfg, &domain)?;
                let cert = global_certificate(&domain, &u0, cfg.q, &cfg.source, cfg.gamma, y0, lam, cfg.heat_tol)?;
                if cert.granted {
                    let mon = global_bound_monitor(&traj, &domain, y0, cfg.gamma, cert.m_bound, cfg.heat_tol)?;
                    rows.push(CheckRow::holds("global_envelope", &scenario, mon.holds));
                }
            }
        }
        Verdict::SolverFailure { .. } => {}
    }
    let probe = bound.map(|b| b.1).unwrap_or(domain.origin());
    if let Some(phi) = phi_for(cfg, &domain, &traj, probe)? {
        rows.push(CheckRow::at_most("phi_identity", &scenario, phi.identity, PHI_IDENTITY_TOL));
        rows.push(CheckRow::at_most("phi_ode_inequality", &scenario, phi.violation, PHI_VIOLATION_TOL));
    }
    Ok(rows)
}

/// Runs [`scenario_checks`] and writes `report.csv` and `summary.txt`.
pub fn report_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let rows = scenario_checks(&ctx.cfg)?;
    let (records, text) = report(&rows)?;
    let mut art = ctx.artifacts()?;
    art.write_csv("report.csv", &REPORT_HEADER, &records)?;
    art.write_text("summary.txt", &text)?;
    art.finish("report", ctx.cfg.seed)?;
    let mut out = Outcome::new();
    out.lines.extend(text.lines().map(String::from));
    out.passed = rows.iter().all(|r| r.passed);
    Ok(out)
}
