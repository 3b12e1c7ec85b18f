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

//! Sweep over the exponential source rate `α`.
//!
//! Every row solves the same datum on the same domain and records the growth
//! criterion, the global-existence certificate, the solver verdict and the
//! upper bound on the blow-up time. Rows are computed in a worker pool and
//! returned in grid order.

use std::time::Instant;

use graphheat_core::blowup::{
    blowup_criterion, blowup_time_bound_over, default_probes, global_certificate, BlowupError,
    CriterionVerdict,
};
use graphheat_core::mild::{global_bound_monitor, mol_reference_solve, solve, Trajectory, Verdict};
use graphheat_core::source::SourceSpec;
use graphheat_core::TruncatedDomain;
use rayon::prelude::*;

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{opt_real, real, Artifacts};
use crate::scenario::{anchor, build_datum, build_domain, domain_lambda1, exhaustion, problem, solve_options};
use crate::CliError;

/// Largest allowed `t_lo / T_upper` on a blow-up row.
pub const BOUND_SLACK: f64 = 1.01;
/// Largest allowed Picard vs method-of-lines sup distance.
pub const CROSS_CHECK_TOL: f64 = 1e-4;
pub const CONTRACTION_LIMIT: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda1_domain: f64,
    pub lambda1_graph: f64,
    /// Growth criterion with `λ₁` of the whole graph.
    pub criterion: Option<CriterionVerdict>,
    /// Growth criterion with `λ₁` of the truncated domain.
    pub criterion_domain: Option<CriterionVerdict>,
    pub certificate_granted: Option<bool>,
    pub certificate_failure: Option<&'static str>,
    pub m_bound: Option<f64>,
    pub verdict: Option<Verdict>,
    pub final_supnorm: Option<f64>,
    pub t_upper: Option<f64>,
    pub max_contraction: Option<f64>,
    pub envelope_holds: Option<bool>,
    pub mol_distance: Option<f64>,
    pub consistent: bool,
    pub error: Option<String>,
    /// Wall time of the row in seconds; reported on stderr, never in the CSV.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub q: f64,
    /// Largest `α` that completed below the smallest `α` that blew up.
    pub transition: (Option<f64>, Option<f64>),
    pub threshold_domain: f64,
    pub threshold_graph: f64,
    pub consistent_rows: usize,
    pub rows: usize,
}

impl SweepSummary {
    pub fn all_consistent(&self) -> bool {
        self.consistent_rows == self.rows
    }
}

struct Shared<'a> {
    cfg: &'a ScenarioConfig,
    domain: &'a TruncatedDomain,
    u0: Vec<f64>,
    y0: usize,
    lambda1_domain: f64,
    lambda1_graph: f64,
}

fn sup_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut d: f64 = 0.0;
    for (k, &t) in a.times.iter().enumerate() {
        if let Some(j) = b.index_of(t) {
            for (x, y) in a.fields[k].iter().zip(&b.fields[j]) {
                d = d.max((x - y).abs());
            }
        }
    }
    d
}

fn criterion_cell(v: Option<CriterionVerdict>) -> (String, String) {
    match v {
        None => (String::new(), String::new()),
        Some(CriterionVerdict::Diverges { eps }) => ("diverges".into(), real(eps)),
        Some(other) => (other.to_string(), String::new()),
    }
}

fn run_row(shared: &Shared, alpha: f64) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        alpha,
        lambda1_domain: shared.lambda1_domain,
        lambda1_graph: shared.lambda1_graph,
        criterion: None,
        criterion_domain: None,
        certificate_granted: None,
        certificate_failure: None,
        m_bound: None,
        verdict: None,
        final_supnorm: None,
        t_upper: None,
        max_contraction: None,
        envelope_holds: None,
        mol_distance: None,
        consistent: false,
        error: None,
        seconds: 0.0,
    };
    if let Err(e) = fill_row(shared, &mut row) {
        row.error = Some(e.to_string());
        row.consistent = false;
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn fill_row(shared: &Shared, row: &mut SweepRow) -> Result<(), CliError> {
    let cfg = shared.cfg;
    let domain = shared.domain;
    let q = cfg.q;
    let source = SourceSpec::exponential(row.alpha).map_err(|e| ConfigError::Field {
        path: "sweep.alpha".into(),
        message: e.to_string(),
    })?;

    row.criterion = Some(blowup_criterion(&source, q, shared.lambda1_graph)?.verdict);
    row.criterion_domain = Some(blowup_criterion(&source, q, shared.lambda1_domain)?.verdict);

    let cert = global_certificate(
        domain,
        &shared.u0,
        q,
        &source,
        cfg.gamma,
        shared.y0,
        shared.lambda1_domain,
        cfg.heat_tol,
    )?;
    row.certificate_granted = Some(cert.granted);
    row.certificate_failure = cert.first_failure.map(|c| c.name());
    row.m_bound = Some(cert.m_bound);

    let opts = solve_options(cfg);
    let prob = problem(cfg, domain, source.clone(), shared.u0.clone())?;
    let traj = solve(&prob, &opts)?;
    row.final_supnorm = traj.supnorm.last().copied();
    row.max_contraction = Some(traj.max_contraction());
    row.verdict = Some(traj.verdict.clone());

    row.t_upper = match blowup_time_bound_over(
        domain,
        &shared.u0,
        &default_probes(domain),
        q,
        &source,
        cfg.bound_cap,
        cfg.heat_tol,
    ) {
        Ok((t, _)) => Some(t),
        Err(BlowupError::NoBoundInHorizon { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    if matches!(traj.verdict, Verdict::CompletedHorizon) {
        let mol = mol_reference_solve(&prob, &opts)?;
        row.mol_distance = Some(sup_distance(&traj, &mol));
        if cert.granted {
            let mon = global_bound_monitor(&traj, domain, shared.y0, cfg.gamma, cert.m_bound, cfg.heat_tol)?;
            row.envelope_holds = Some(mon.holds);
        }
    }

    let mut ok = traj.max_contraction() <= CONTRACTION_LIMIT;
    match &traj.verdict {
        Verdict::BlowupDetected { t_lo, .. } => {
            ok &= !cert.granted;
            if let Some(tu) = row.t_upper {
                ok &= *t_lo <= BOUND_SLACK * tu;
            }
        }
        Verdict::CompletedHorizon => {
            ok &= !matches!(row.criterion_domain, Some(CriterionVerdict::Diverges { .. }));
            ok &= row.mol_distance.is_some_and(|d| d <= CROSS_CHECK_TOL);
            ok &= row.envelope_holds != Some(false);
        }
        Verdict::SolverFailure { .. } => ok = false,
    }
    row.consistent = ok;
    Ok(())
}

/// Runs the sweep over `cfg.sweep_alpha` with at most `jobs` workers.
pub fn dichotomy_sweep(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<(Vec<SweepRow>, SweepSummary), CliError> {
    let alphas = cfg.sweep_alpha.clone().ok_or_else(|| ConfigError::Field {
        path: "sweep.alpha".into(),
        message: "the dichotomy sweep needs an alpha grid".into(),
    })?;
    if alphas.is_empty() {
        return Err(ConfigError::Field {
            path: "sweep.alpha".into(),
            message: "grid must be nonempty".into(),
        }
        .into());
    }
    let domain = build_domain(cfg)?;
    let lambda1_domain = domain_lambda1(cfg, &domain)?;
    let lambda1_graph = match (cfg.lambda1, exhaustion(cfg)?) {
        (Some(l), _) => l,
        (None, Some(ex)) => ex.limit,
        (None, None) => lambda1_domain,
    };
    let shared = Shared {
        cfg,
        u0: build_datum(cfg, &domain)?,
        y0: anchor(cfg, &domain)?,
        domain: &domain,
        lambda1_domain,
        lambda1_graph,
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| alphas.par_iter().map(|&a| run_row(&shared, a)).collect());

    let mut order: Vec<&SweepRow> = rows.iter().collect();
    order.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let first_blowup = order
        .iter()
        .find(|r| r.verdict.as_ref().is_some_and(Verdict::is_blowup))
        .map(|r| r.alpha);
    let last_completed = order
        .iter()
        .filter(|r| matches!(r.verdict, Some(Verdict::CompletedHorizon)))
        .filter(|r| first_blowup.is_none_or(|b| r.alpha < b))
        .map(|r| r.alpha)
        .last();
    let summary = SweepSummary {
        q: cfg.q,
        transition: (last_completed, first_blowup),
        threshold_domain: (cfg.q - 1.0) * lambda1_domain,
        threshold_graph: (cfg.q - 1.0) * lambda1_graph,
        consistent_rows: rows.iter().filter(|r| r.consistent).count(),
        rows: rows.len(),
    };
    Ok((rows, summary))
}

pub const SWEEP_HEADER: [&str; 19] = [
    "alpha",
    "lambda1_domain",
    "lambda1_graph",
    "criterion",
    "criterion_eps",
    "criterion_domain",
    "certificate",
    "certificate_failure",
    "m_bound",
    "verdict",
    "t_lo",
    "t_hi",
    "final_supnorm",
    "t_upper",
    "max_contraction",
    "envelope_holds",
    "mol_distance",
    "consistent",
    "error",
];

pub fn sweep_record(r: &SweepRow) -> Vec<String> {
    let (crit, crit_eps) = criterion_cell(r.criterion);
    let (crit_dom, _) = criterion_cell(r.criterion_domain);
    let (t_lo, t_hi) = match r.verdict {
        Some(Verdict::BlowupDetected { t_lo, t_hi }) => (Some(t_lo), Some(t_hi)),
        _ => (None, None),
    };
    let flag = |b: Option<bool>| b.map(|v| v.to_string()).unwrap_or_default();
    vec![
        real(r.alpha),
        real(r.lambda1_domain),
        real(r.lambda1_graph),
        crit,
        crit_eps,
        crit_dom,
        match r.certificate_granted {
            Some(true) => "granted".into(),
            Some(false) => "refuted".into(),
            None => String::new(),
        },
        r.certificate_failure.unwrap_or("").into(),
        opt_real(r.m_bound),
        r.verdict.as_ref().map(|v| v.label().to_string()).unwrap_or_default(),
        opt_real(t_lo),
        opt_real(t_hi),
        opt_real(r.final_supnorm),
        opt_real(r.t_upper),
        opt_real(r.max_contraction),
        flag(r.envelope_holds),
        opt_real(r.mol_distance),
        r.consistent.to_string(),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn summary_text(s: &SweepSummary) -> String {
    let side = |v: Option<f64>| v.map(|a| format!("{a}")).unwrap_or_else(|| "none".into());
    format!(
        "transition_alpha_lo={}\ntransition_alpha_hi={}\nthreshold_domain={}\nthreshold_graph={}\nconsistent_rows={}/{}\n",
        side(s.transition.0),
        side(s.transition.1),
        real(s.threshold_domain),
        real(s.threshold_graph),
        s.consistent_rows,
        s.rows
    )
}

/// Writes `dichotomy.csv` and `dichotomy_summary.txt`.
pub fn write_sweep(rows: &[SweepRow], summary: &SweepSummary, out: &mut Artifacts) -> Result<(), CliError> {
    let records: Vec<Vec<String>> = rows.iter().map(sweep_record).collect();
    out.write_csv("dichotomy.csv", &SWEEP_HEADER, &records)?;
    out.write_text("dichotomy_summary.txt", &summary_text(summary))?;
    Ok(())
}
