//! `platecont`: scenario-driven verification runs.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration error,
//! 3 solver error.

mod pipeline;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use pipeline::{property_checks, Pipeline, StageError, StageOutcome};
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "platecont", version, about = "Boundary unique continuation checks for clamped Kirchhoff-Love plates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Flatten the boundary and certify the conformal map.
    Flatten,
    /// Solve the clamped plate problem.
    Solve,
    /// Reflect the solution across the flat boundary and check the traces.
    Reflect,
    /// Carleman ratio sweep and Hardy battery.
    Carleman,
    /// Three-spheres inequality at the configured radii.
    ThreeSpheres,
    /// Quantitative strong unique continuation bound.
    Sucp,
    /// Every stage plus the library property checks.
    VerifyAll,
    /// The stages listed in each scenario; scenarios run in parallel.
    Run,
}

#[derive(Args)]
struct Opts {
    /// Bundled scenario name or TOML path; repeat for `run`.
    #[arg(long, global = true)]
    scenario: Vec<String>,
    #[arg(long, global = true)]
    mesh: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long = "tau-min", global = true)]
    tau_min: Option<f64>,
    #[arg(long = "tau-max", global = true)]
    tau_max: Option<f64>,
    /// Three radii, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Reports go to `<out>/<scenario name>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

impl Opts {
    fn apply(&self, mut sc: Scenario) -> Result<Scenario, String> {
        if let Some(m) = self.mesh {
            sc.mesh = m;
        }
        if let Some(e) = self.epsilon {
            sc.weight.epsilon = e;
        }
        if let Some(t) = self.tau_min {
            sc.weight.tau_min = t;
        }
        if let Some(t) = self.tau_max {
            sc.weight.tau_max = t;
        }
        if let Some(r) = &self.radii {
            let [a, b, c] = r[..] else {
                return Err(format!("--radii needs exactly three values, got {}", r.len()));
            };
            sc.three_spheres.radii = vec![[a, b, c]];
        }
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(o) = &self.out {
            sc.out = Some(o.clone());
        }
        sc.validate().map_err(|e| e.0)?;
        Ok(sc)
    }
}

fn stage_name(c: Command) -> Option<&'static str> {
    Some(match c {
        Command::Flatten => "flatten",
        Command::Solve => "solve",
        Command::Reflect => "reflect",
        Command::Carleman => "carleman",
        Command::ThreeSpheres => "three-spheres",
        Command::Sucp => "sucp",
        Command::VerifyAll | Command::Run => return None,
    })
}

/// Runs the stages of one scenario and writes its reports; returns the exit code.
fn run_scenario(sc: Scenario, command: Command) -> i32 {
    let dir = sc.out.clone().unwrap_or_else(|| PathBuf::from("reports")).join(&sc.name);
    let stages: Vec<String> = match command {
        Command::Run => sc.stages.clone(),
        Command::VerifyAll => scenario::STAGES.iter().map(|s| s.to_string()).collect(),
        c => vec![stage_name(c).unwrap().to_string()],
    };
    let mut pipe = match Pipeline::new(sc.clone()) {
        Ok(p) => p,
        Err(e) => return fail(&sc, "setup", &e),
    };
    let mut outcomes: Vec<StageOutcome> = Vec::new();
    for stage in &stages {
        match pipe.run(stage) {
            Ok(o) => outcomes.push(o),
            Err(e) => return fail(pipe.scenario(), stage, &e),
        }
    }
    if command == Command::VerifyAll {
        match property_checks() {
            Ok(o) => outcomes.push(o),
            Err(e) => return fail(&sc, "properties", &e),
        }
    }
    let pass = outcomes.iter().all(|o| o.pass);
    for o in &outcomes {
        println!("[{}] {}: {}", sc.name, o.stage, if o.pass { "PASS" } else { "FAIL" });
        if let Err(e) = report::write_stage(&dir, &sc, o) {
            eprintln!("error [{}] writing {}: {e}", sc.name, o.stage);
            return 3;
        }
    }
    let summary = report::envelope(
        &sc,
        "summary",
        pass,
        json!({ "stages": outcomes.iter().map(|o| json!({"stage": o.stage, "pass": o.pass})).collect::<Vec<_>>() }),
    );
    if let Err(e) = report::write_text(&dir, "scenario.toml", &Scenario { out: None, ..sc.clone() }.to_toml())
        .and_then(|_| report::write_json(&dir, "summary.json", &summary))
    {
        eprintln!("error [{}] writing summary: {e}", sc.name);
        return 3;
    }
    println!("[{}] summary: {} ({})", sc.name, if pass { "PASS" } else { "FAIL" }, dir.display());
    i32::from(!pass)
}

fn fail(sc: &Scenario, stage: &str, e: &StageError) -> i32 {
    eprintln!("error [{}] stage {stage}: {}", sc.name, e.message());
    e.exit_code()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.opts.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    let names = if cli.opts.scenario.is_empty() { vec!["flat-biharmonic".to_string()] } else { cli.opts.scenario.clone() };
    let mut scenarios = Vec::new();
    for n in &names {
        match Scenario::load(n).map_err(|e| e.0).and_then(|s| cli.opts.apply(s)) {
            Ok(s) => scenarios.push(s),
            Err(e) => {
                eprintln!("error: scenario '{n}': {e}");
                return ExitCode::from(2);
            }
        }
    }
    let command = cli.command;
    let codes: Vec<i32> = if command == Command::Run {
        scenarios.into_par_iter().map(|s| run_scenario(s, command)).collect()
    } else {
        scenarios.into_iter().map(|s| run_scenario(s, command)).collect()
    };
    ExitCode::from(codes.into_iter().max().unwrap_or(0) as u8)
}
