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

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphheat_cli::commands::{self, Context};
use graphheat_cli::{CliError, GraphSource, Outcome, ScenarioConfig};

/// Heat semigroup and semilinear blow-up experiments on weighted graphs.
///
/// Exit status: 0 when every check passed, 2 when a scientific check
/// failed, 1 on usage or configuration errors.
#[derive(Parser)]
#[command(name = "graphheat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized sample vertices; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Generator spec (e.g. `tree:d=3,r=8,mu=unit`) or graph file.
    #[arg(long)]
    graph: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured graph and write it in the text format.
    GenGraph(Common),
    /// Bottom of the spectrum along truncation radii.
    Lambda1 {
        #[command(flatten)]
        common: Common,
        /// Comma-separated radii, e.g. `4,5,6`.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<u32>>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Heat kernel columns, optionally validated.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Source vertex of the column; defaults to the origin.
        #[arg(long)]
        source: Option<usize>,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        validate: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Mild solution with blow-up detection.
    Solve(Common),
    /// Upper bound on the blow-up time and the Φ functional.
    BoundCheck(Common),
    /// Global-existence certificate.
    Certify(Common),
    /// Growth criterion for blow-up.
    Criterion(Common),
    /// Sweep over the exponential source rate.
    Dichotomy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alpha grid; overrides `sweep.alpha`.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
    /// All checks for the configured scenario.
    Report(Common),
}

fn context(common: &Common) -> Result<Context, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(g) = &common.graph {
        cfg.graph = GraphSource::parse(g)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Context {
        cfg,
        out,
        jobs: common.jobs,
    })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::GenGraph(c) => commands::gen_graph(&context(&c)?),
        Command::Lambda1 { common, radii, tol } => commands::lambda1_cmd(&context(&common)?, radii, tol),
        Command::Kernel {
            common,
            source,
            times,
            validate,
            tol,
        } => commands::kernel_cmd(&context(&common)?, source, times, validate, tol),
        Command::Solve(c) => commands::solve_cmd(&context(&c)?),
        Command::BoundCheck(c) => commands::bound_check(&context(&c)?),
        Command::Certify(c) => commands::certify(&context(&c)?),
        Command::Criterion(c) => commands::criterion(&context(&c)?),
        Command::Dichotomy { common, alpha } => {
            let mut ctx = context(&common)?;
            if let Some(a) = alpha {
                if a.is_empty() {
                    return Err(CliError::Usage("--alpha grid must be nonempty".into()));
                }
                ctx.cfg.sweep_alpha = Some(a);
            }
            commands::dichotomy(&ctx)
        }
        Command::Report(c) => commands::report_cmd(&context(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
