use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tnfo::io::{self, SummaryRow, UnitsBlock};
use tnfo::model::{synth_network, Network, SynthSpec};
use tnfo::nlp::{assemble_simulation, NetworkState, ObjectiveWeights};
use tnfo::scenario::{optimize, run_batch, sensitivity_sweep, Run, RunConfig, RunSummary, Scenario};
use tnfo::solver::{solve_newton, NewtonOptions, SolveStatus};
use tnfo::units::{kelvin_to_celsius, psi_to_pa, w_to_mw};

/// Steady-state simulation and optimization of steam district heating
/// networks.
#[derive(Debug, Parser)]
#[command(name = "tnfo", version)]
struct Cli {
    /// Feasibility and optimality tolerance of the solvers.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration limit of the solvers.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Objective weights as `name=value` pairs separated by commas; names are
    /// slack, outlet_pressure, outlet_temperature, flow, inlet_pressure.
    #[arg(long, global = true)]
    weights: Option<String>,
    /// Lower bound on the plant outlet pressure, psi.
    #[arg(long, global = true)]
    plant_outlet_pmin: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a network file and print its component census.
    Validate { network: PathBuf },
    /// Solve the network physics with fixed plant, pump and load setpoints.
    Simulate {
        network: PathBuf,
        setpoints: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Optimize one scenario.
    Optimize {
        network: PathBuf,
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Optimize every scenario file (*.json) in a directory.
    Batch {
        network: PathBuf,
        scenario_dir: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Optimize under uniformly scaled demand.
    Sweep {
        network: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write a full-scale synthetic network: 134 junctions, 45 loads, 11 pumps.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    /// Bad input: unreadable or invalid files, bad flags.
    Invalid(anyhow::Error),
    /// Input was fine but a solve did not succeed.
    Solve(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Solve(_) => 2,
        }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn parse_weights(spec: &str) -> anyhow::Result<ObjectiveWeights> {
    let mut w = ObjectiveWeights::default();
    for pair in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("weight `{pair}` is not name=value"))?;
        let value: f64 = value.trim().parse().with_context(|| format!("weight `{name}`"))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(anyhow!("weight `{name}` must be finite and >= 0"));
        }
        let slot = match name.trim() {
            "slack" => &mut w.slack,
            "outlet_pressure" => &mut w.outlet_pressure,
            "outlet_temperature" => &mut w.outlet_temperature,
            "flow" => &mut w.flow,
            "inlet_pressure" => &mut w.inlet_pressure,
            other => return Err(anyhow!("unknown weight `{other}`")),
        };
        *slot = value;
    }
    Ok(w)
}

impl Cli {
    fn config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(tol) = self.tol {
            cfg.solver.feasibility_tol = tol;
            cfg.solver.optimality_tol = tol;
        }
        if let Some(n) = self.max_iter {
            cfg.solver.max_iter = n;
        }
        cfg.solver.validate().map_err(invalid)?;
        if let Some(spec) = &self.weights {
            cfg.weights = parse_weights(spec).map_err(invalid)?;
        }
        Ok(cfg)
    }

    fn network(&self, path: &Path) -> Result<Network, Failure> {
        let net = io::parse_network(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(invalid)?;
        match self.plant_outlet_pmin {
            None => Ok(net),
            Some(psi) => {
                let mut bounds = *net.bounds();
                bounds.plant_outlet_p_min = psi_to_pa(psi);
                bounds.validate().context("--plant-outlet-pmin").map_err(invalid)?;
                Ok(net.with_bounds(bounds))
            }
        }
    }
}

fn print_summary(s: &RunSummary) {
    println!(
        "{}: {} after {} iterations; supplied {:.4} MW, unmet {:.2} %, plant T_out {:.2} C, f {:.3} kg/s",
        s.name,
        s.status,
        s.iterations,
        w_to_mw(s.supplied),
        s.unmet_pct,
        kelvin_to_celsius(s.plant_t_out),
        s.plant_f
    );
}

fn solve_failure(run: &Run) -> Failure {
    Failure::Solve(anyhow!(
        "scenario `{}` ended with status {}",
        run.summary.name,
        run.report.status
    ))
}

fn validate(cli: &Cli, network: &Path) -> Result<(), Failure> {
    let net = cli.network(network)?;
    println!("valid: {}", net.summary());
    Ok(())
}

fn simulate(cli: &Cli, network: &Path, setpoints: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let net = cli.network(network)?;
    let sp = io::parse_setpoints(setpoints)
        .with_context(|| format!("reading {}", setpoints.display()))
        .map_err(invalid)?;
    let sys = assemble_simulation(&net, &sp).map_err(invalid)?;
    let mut opts = NewtonOptions::default();
    if let Some(n) = cli.max_iter {
        opts.max_iter = n;
    }
    if let Some(tol) = cli.tol {
        opts.tol = tol;
    }
    let rep = solve_newton(&sys, &sys.initial_guess(), &opts).map_err(|e| Failure::Solve(e.into()))?;
    let problem = sys.problem();
    let state = NetworkState::from_vector(problem, sys.expand(&rep.x));
    let summary = RunSummary::with_status("simulation", problem, &state, "converged", rep.iterations);
    print_summary(&summary);
    if let Some(dir) = out {
        io::export_results(problem, &state, &summary, dir).map_err(invalid)?;
    }
    Ok(())
}

fn optimize_one(cli: &Cli, network: &Path, scenario: &Path, out: &Path) -> Result<(), Failure> {
    let net = cli.network(network)?;
    let cfg = cli.config()?;
    let scen = io::parse_scenario(scenario)
        .with_context(|| format!("reading {}", scenario.display()))
        .map_err(invalid)?;
    let run = optimize(&net, &scen, &cfg, None).map_err(|e| match e {
        tnfo::scenario::RunError::Nlp(e) => invalid(e),
        tnfo::scenario::RunError::Solver(e) => Failure::Solve(e.into()),
    })?;
    io::export_results(&run.problem, &run.state, &run.summary, out).map_err(invalid)?;
    print_summary(&run.summary);
    if run.report.status != SolveStatus::Optimal {
        return Err(solve_failure(&run));
    }
    Ok(())
}

/// Directory name for a scenario: its name with path-hostile characters
/// replaced.
fn scenario_dir_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.chars().all(|c| c == '.') {
        "scenario".into()
    } else {
        cleaned
    }
}

fn batch(cli: &Cli, network: &Path, dir: &Path, out: &Path) -> Result<(), Failure> {
    let net = cli.network(network)?;
    let cfg = cli.config()?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(invalid)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(anyhow!("no scenario files (*.json) in {}", dir.display())));
    }
    let scenarios = files
        .iter()
        .map(|p| io::parse_scenario(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<Scenario>>>()
        .map_err(invalid)?;
    let rows = run_batch(&net, &scenarios, &cfg);
    let mut summary = Vec::with_capacity(rows.len());
    let mut failed = Vec::new();
    for row in &rows {
        match &row.result {
            Ok(run) => {
                io::export_state(&run.problem, &run.state, &out.join(scenario_dir_name(&row.name))).map_err(invalid)?;
                print_summary(&run.summary);
                summary.push(SummaryRow::from(&run.summary));
                if run.report.status != SolveStatus::Optimal {
                    failed.push(row.name.clone());
                }
            }
            Err(e) => {
                println!("{}: error: {e}", row.name);
                summary.push(io::failed_summary_row(&row.name, &format!("error: {e}")));
                failed.push(row.name.clone());
            }
        }
    }
    io::export_summary(&summary, out).map_err(invalid)?;
    if !failed.is_empty() {
        return Err(Failure::Solve(anyhow!(
            "{} scenario(s) not solved: {}",
            failed.len(),
            failed.join(", ")
        )));
    }
    Ok(())
}

fn sweep(cli: &Cli, network: &Path, from: f64, to: f64, steps: usize, out: &Path) -> Result<(), Failure> {
    let net = cli.network(network)?;
    let cfg = cli.config()?;
    let points = sensitivity_sweep(&net, from, to, steps, &cfg).map_err(invalid)?;
    io::export_sweep(&points, out).map_err(invalid)?;
    let mut failed = 0;
    for p in &points {
        match &p.status {
            Ok(s) => println!(
                "x{:.4}: {s}; plant T_out {:.2} C, f {:.3} kg/s, pipe losses {:.4} MW",
                p.multiplier,
                kelvin_to_celsius(p.plant_t_out),
                p.plant_f,
                w_to_mw(p.pipe_losses)
            ),
            Err(e) => println!("x{:.4}: error: {e}", p.multiplier),
        }
        if p.status != Ok(SolveStatus::Optimal) {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::Solve(anyhow!("{failed} sweep point(s) not solved")));
    }
    Ok(())
}

fn synth(seed: u64, out: &Path) -> Result<(), Failure> {
    let net = synth_network(&SynthSpec::full_scale(seed)).map_err(invalid)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::ensure_dir(parent).map_err(invalid)?;
    }
    std::fs::write(out, io::network_to_string(&net, &UnitsBlock::display()))
        .with_context(|| format!("writing {}", out.display()))
        .map_err(invalid)?;
    println!("wrote {}: {}", out.display(), net.summary());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { network } => validate(cli, network),
        Command::Simulate {
            network,
            setpoints,
            out,
        } => simulate(cli, network, setpoints, out.as_deref()),
        Command::Optimize { network, scenario, out } => optimize_one(cli, network, scenario, out),
        Command::Batch {
            network,
            scenario_dir,
            out,
        } => batch(cli, network, scenario_dir, out),
        Command::Sweep {
            network,
            from,
            to,
            steps,
            out,
        } => sweep(cli, network, *from, *to, *steps, out),
        Command::Synth { seed, out } => synth(*seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Solve(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
