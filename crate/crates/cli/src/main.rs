use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gridcut::attack::{AttackStatus, VerifyError};
use gridcut::attack_graph::protected_attack_graph;
use gridcut::case::{load_case, CaseFormat};
use gridcut::experiment::{randomize_scenario, run_sweep, Engine, ScenarioConfig, Sweep, SweepParam};
use gridcut::oracle::l1::{DEFAULT_THETA1, DEFAULT_THETA2};
use gridcut::oracle::{brute_force_attack, l1_attack, L1Error};
use gridcut::planner::{greedy_protect_with, ProtectOptions};
use gridcut::{builtin_case, greedy_pmu, optimal_attack, verify_hidden, GridTopology, MeasurementSet, Scenario};

#[derive(Parser)]
#[command(name = "gridcut", version, about = "Minimum-cardinality hidden attacks on DC state estimation")]
struct Cli {
    /// Built-in case (ieee14, ieee30, ieee57, ieee118) or a MATPOWER / JSON file.
    #[arg(long, global = true, default_value = "ieee14")]
    case: String,
    /// Native JSON scenario; overrides --case and the random meter draw.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Print the contracted attack graph as DOT on stderr.
    #[arg(long, global = true)]
    dump_graph: bool,
    #[command(flatten)]
    draw: DrawArgs,
    #[command(subcommand)]
    command: Command,
}

/// How meters are placed when no scenario file is given.
#[derive(Args, Clone)]
struct DrawArgs {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1.0)]
    flow_coverage: f64,
    #[arg(long, global = true, default_value_t = 0.6)]
    angle_coverage: f64,
    #[arg(long, global = true, default_value_t = 0.0)]
    protect_fraction: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal hidden attack and print it as JSON.
    Attack {
        /// Also check residual invariance over this many random trials.
        #[arg(long, default_value_t = 0)]
        verify_trials: usize,
    },
    /// Greedily protect K measurements.
    Protect {
        #[arg(long)]
        k: usize,
        /// Consider every unprotected measurement, not just the attack support.
        #[arg(long)]
        full_scan: bool,
    },
    /// Greedily place K secure PMUs.
    Pmu {
        #[arg(long)]
        k: usize,
    },
    /// Compare the min-cut engine with brute force and the l1 relaxation.
    Verify {
        /// Largest bus count for brute-force enumeration.
        #[arg(long, default_value_t = 20)]
        max_n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
    },
    /// Run a randomized parameter sweep and write CSV.
    Experiment {
        /// protect_fraction, pmu_count, pmu_fraction, greedy_k or greedy_pmu_k.
        #[arg(long)]
        sweep: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// mincut, brute or l1.
        #[arg(long, default_value = "mincut")]
        engine: String,
        /// Aggregate CSV path; raw rows go next to it with a `.raw.csv` suffix.
        #[arg(long)]
        out: PathBuf,
        /// Redraw every sweep point independently instead of nesting.
        #[arg(long)]
        independent_draws: bool,
        /// Keep the same angle-meter buses in every trial.
        #[arg(long)]
        fixed_meters: bool,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Verification(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Validation(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_topology(case: &str) -> anyhow::Result<GridTopology> {
    if let Some(topo) = builtin_case(case) {
        return Ok(topo);
    }
    let path = Path::new(case);
    if !path.exists() {
        bail!("'{case}' is neither a built-in case nor an existing file");
    }
    match CaseFormat::from_path(path) {
        CaseFormat::NativeJson => Ok(Scenario::load(path)?.topology),
        format => Ok(load_case(path, format).with_context(|| format!("loading {case}"))?),
    }
}

fn base_config(draw: &DrawArgs, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        flow_coverage: draw.flow_coverage,
        angle_coverage: draw.angle_coverage,
        protect_fraction: draw.protect_fraction,
        seed,
        ..ScenarioConfig::default()
    }
}

fn load_scenario(cli: &Cli) -> anyhow::Result<Scenario> {
    if let Some(path) = &cli.scenario {
        let scenario = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
        scenario.measurements.validate(&scenario.topology)?;
        return Ok(scenario);
    }
    let topo = load_topology(&cli.case)?;
    let ms = randomize_scenario(&topo, &base_config(&cli.draw, cli.draw.seed), 0)?;
    Ok(Scenario { topology: topo, measurements: ms, seed: Some(cli.draw.seed) })
}

fn dump_graph(cli: &Cli, topo: &GridTopology, ms: &MeasurementSet) {
    if cli.dump_graph {
        eprint!("{}", protected_attack_graph(topo, ms).to_dot());
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Attack { verify_trials } => {
            let s = load_scenario(cli)?;
            dump_graph(cli, &s.topology, &s.measurements);
            let result = optimal_attack(&s.topology, &s.measurements);
            println!("{}", result.to_json());
            if *verify_trials > 0 && result.status == AttackStatus::Optimal {
                let seed = s.seed.unwrap_or(0);
                match verify_hidden(&s.topology, &s.measurements, &result, *verify_trials, 0.01, seed) {
                    Ok(report) => eprintln!(
                        "verified {} trials: max residual change {:e}, max shift error {:e}",
                        report.trials, report.max_residual_diff, report.max_shift_deviation
                    ),
                    Err(e) => return Err(Failure::Verification(e.to_string())),
                }
            }
        }
        Command::Protect { k, full_scan } => {
            let s = load_scenario(cli)?;
            dump_graph(cli, &s.topology, &s.measurements);
            let plan = greedy_protect_with(&s.topology, &s.measurements, *k, ProtectOptions { full_scan: *full_scan })?;
            println!("{}", plan.to_json());
        }
        Command::Pmu { k } => {
            let s = load_scenario(cli)?;
            dump_graph(cli, &s.topology, &s.measurements);
            let plan = greedy_pmu(&s.topology, &s.measurements, *k)?;
            println!("{}", plan.to_json());
        }
        Command::Verify { max_n, trials, sigma } => {
            let s = load_scenario(cli)?;
            dump_graph(cli, &s.topology, &s.measurements);
            verify(&s, *max_n, *trials, *sigma)?;
        }
        Command::Experiment { sweep, values, trials, engine, out, independent_draws, fixed_meters } => {
            if cli.scenario.is_some() {
                return Err(Failure::Validation(anyhow::anyhow!(
                    "experiments draw their own meters; use --case instead of --scenario"
                )));
            }
            let topo = load_topology(&cli.case)?;
            let config = ScenarioConfig {
                trials: *trials,
                independent_draws: *independent_draws,
                fixed_meters: *fixed_meters,
                ..base_config(&cli.draw, cli.draw.seed)
            };
            let sweep = Sweep { param: sweep.parse::<SweepParam>()?, values: values.clone() };
            let engine: Engine = engine.parse()?;
            let output = run_sweep(&topo, &config, &sweep, engine)?;
            let raw_path = out.with_extension("raw.csv");
            fs::write(out, output.summary.to_csv()?).with_context(|| format!("writing {}", out.display()))?;
            fs::write(&raw_path, output.raw_csv()?)
                .with_context(|| format!("writing {}", raw_path.display()))?;
            print!("{}", output.summary.to_csv()?);
        }
    }
    Ok(())
}

fn show(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn verify(s: &Scenario, max_n: usize, trials: usize, sigma: f64) -> Result<(), Failure> {
    let (topo, ms) = (&s.topology, &s.measurements);
    let result = optimal_attack(topo, ms);
    let engine = result.cost().meters();
    let oracle = if topo.bus_count() <= max_n {
        Some(brute_force_attack(topo, ms, max_n)?.optimal_cardinality)
    } else {
        None
    };
    let l1 = match l1_attack(topo, ms, DEFAULT_THETA1, DEFAULT_THETA2) {
        Ok(r) => Some(r.cardinality),
        Err(L1Error::Infeasible) => None,
        Err(e) => return Err(e.into()),
    };

    let mut problems = Vec::new();
    let agree = match oracle {
        Some(o) if o != engine => {
            problems.push(format!("engine {} but brute force {}", show(engine), show(o)));
            "no"
        }
        Some(_) => "yes",
        None => "skipped",
    };
    if let (Some(e), Some(l)) = (engine, l1) {
        if l < e {
            problems.push(format!("l1 support {l} is below the min-cut {e}"));
        }
    }
    println!("{:<8} {:<8} {:<8} {:<8}", "engine", "oracle", "l1", "agree");
    println!(
        "{:<8} {:<8} {:<8} {:<8}",
        show(engine),
        oracle.map_or_else(|| "n/a".to_string(), show),
        show(l1),
        agree
    );

    if result.status == AttackStatus::Optimal && trials > 0 {
        match verify_hidden(topo, ms, &result, trials, sigma, s.seed.unwrap_or(0)) {
            Ok(report) => println!(
                "hidden over {} trials: max residual change {:e}, max shift error {:e}",
                report.trials, report.max_residual_diff, report.max_shift_deviation
            ),
            Err(VerifyError::VerificationFailure { trial, residual_diff, shift_deviation }) => {
                problems.push(format!(
                    "trial {trial}: residual change {residual_diff:e}, shift error {shift_deviation:e}"
                ));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(problems.join("; ")))
    }
}
