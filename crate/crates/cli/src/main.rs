use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tramflow::io::config::DwellSetting;
use tramflow::io::report::{
    self, load_saved, render, write_rendered, write_run_info, write_simulation, write_sweep,
};
use tramflow::io::tables;
use tramflow::io::{bundled_names, load_scenario, LoadedScenario, SolverChoice, SweepKind};

// Writes to stdout; a closed pipe ends the program quietly.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = write!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        out!($($arg)*);
        out!("\n");
    }};
}

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "TRAMFLOW_OUT";
const DEFAULT_OUT: &str = "tramflow-out";

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "tramflow",
    version,
    about = "Passenger flow simulation on tram networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a schedule for admissibility.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Run a single simulation or a Monte Carlo study.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Also write tram trajectories and the stop event log of run 0.
        #[arg(long)]
        emit_trajectories: bool,
    },
    /// Repeat a Monte Carlo study over a grid of schedule variants.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Re-render the tables of saved results.
    Report {
        /// Directory holding report.json or sweep.json.
        dir: PathBuf,
        /// Write the tables here instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled datasets.
    Datasets,
}

#[derive(Args, Debug)]
struct ScenarioArg {
    /// Bundled dataset name, dataset directory or configuration file.
    #[arg(long)]
    scenario: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    #[arg(long, value_enum)]
    dwell_mode: Option<DwellArg>,
    /// Output directory; defaults to $TRAMFLOW_OUT, then the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SolverArg {
    Exact,
    Upwind,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DwellArg {
    Off,
    Sum,
    Paper,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Frequency,
    Cancellation,
    Shift,
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn runtime<E: Into<anyhow::Error>>(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Validate { scenario } => validate(&scenario.scenario),
        Command::Simulate {
            scenario,
            run,
            solver,
            emit_trajectories,
        } => {
            let mut s = load(&scenario.scenario, &run)?;
            if let Some(solver) = solver {
                s.config.solver = match solver {
                    SolverArg::Exact => SolverChoice::Exact,
                    SolverArg::Upwind => SolverChoice::Upwind,
                    SolverArg::Both => SolverChoice::Both,
                };
            }
            if s.config.solver != SolverChoice::Exact && s.config.seed.is_none() {
                return Err(Failure::Validation(anyhow!(
                    "the upwind solver replays a fixed demand realisation; pass --seed"
                )));
            }
            simulate(&s, &run, emit_trajectories)
        }
        Command::Sweep {
            scenario,
            run,
            kind,
        } => {
            let s = load(&scenario.scenario, &run)?;
            let kind = match kind {
                KindArg::Frequency => SweepKind::Frequency,
                KindArg::Cancellation => SweepKind::Cancellation,
                KindArg::Shift => SweepKind::Shift,
            };
            sweep(&s, &run, kind)
        }
        Command::Report { dir, out } => rerender(&dir, out.as_deref()),
        Command::Datasets => {
            for name in bundled_names() {
                outln!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(spec: &str, args: &RunArgs) -> Result<LoadedScenario, Failure> {
    let mut s = load_scenario(spec).map_err(|e| Failure::Validation(e.into()))?;
    if let Some(seed) = args.seed {
        s.config.seed = Some(seed);
    }
    if let Some(runs) = args.runs {
        s.config.runs = runs;
    }
    if let Some(d) = args.dwell_mode {
        s.config.scenario.dwell = match d {
            DwellArg::Off => DwellSetting::Off,
            DwellArg::Sum => DwellSetting::Sum,
            DwellArg::Paper => DwellSetting::Paper,
        };
    }
    Ok(s)
}

fn out_dir(s: &LoadedScenario, args: &RunArgs) -> PathBuf {
    if let Some(dir) = &args.out {
        return dir.clone();
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir).join(&s.config.name);
    }
    match &s.config.out {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(DEFAULT_OUT).join(&s.config.name),
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn validate(spec: &str) -> Result<ExitCode, Failure> {
    let s = load_scenario(spec).map_err(|e| Failure::Validation(e.into()))?;
    let report = s.experiment.validate();
    let trips = s.experiment.timetable.trips.len();
    if report.is_admissible() {
        outln!("{}: admissible ({trips} trips)", s.config.name);
        return Ok(ExitCode::SUCCESS);
    }
    outln!(
        "{}: not admissible, {} violation(s) in {trips} trips",
        s.config.name,
        report.violations.len()
    );
    for v in &report.violations {
        outln!("  {v}");
    }
    Ok(ExitCode::from(EXIT_VALIDATION))
}

fn simulate(s: &LoadedScenario, args: &RunArgs, emit: bool) -> Result<ExitCode, Failure> {
    let output = report::simulate(s, emit).map_err(Failure::runtime)?;
    let dir = out_dir(s, args);
    write_simulation(&dir, &output, &s.experiment.network)
        .and_then(|_| write_run_info(&dir, &command_line()))
        .map_err(Failure::runtime)?;
    let r = &output.report;
    if !r.admissible {
        outln!("{}: not admissible", s.config.name);
        for v in &r.violations {
            outln!("  {v}");
        }
        return Ok(ExitCode::from(EXIT_VALIDATION));
    }
    if let Some(single) = &r.single {
        out!("{}", tables::run_totals_table(single));
        if single.warnings > 0 {
            eprintln!(
                "warning: {} solver warning(s), see events.csv with --emit-trajectories",
                single.warnings
            );
        }
    }
    if let Some(mc) = &r.monte_carlo {
        out!("{}", tables::mc_totals_table(mc));
        if !mc.valid {
            eprintln!("error: {} of {} runs failed", mc.failed.len(), mc.runs);
            for f in mc.failed.iter().take(5) {
                eprintln!("  run {}: {}", f.run, f.error);
            }
            outln!("results in {}", dir.display());
            return Ok(ExitCode::from(EXIT_RUNTIME));
        }
    }
    if let Some(g) = &r.grid_check {
        let worst = g
            .edges
            .iter()
            .map(|e| e.conservation_residual.abs())
            .fold(0.0, f64::max);
        outln!(
            "grid check: {} edges, max conservation residual {}",
            g.edges.len(),
            tables::sig9(worst)
        );
    }
    outln!("results in {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn sweep(s: &LoadedScenario, args: &RunArgs, kind: SweepKind) -> Result<ExitCode, Failure> {
    let admissibility = s.experiment.validate();
    if !admissibility.is_admissible() {
        return Err(Failure::Validation(anyhow!(
            "{}: base schedule is not admissible ({} violations)",
            s.config.name,
            admissibility.violations.len()
        )));
    }
    let r = report::sweep(s, kind).map_err(Failure::runtime)?;
    let dir = out_dir(s, args);
    write_sweep(&dir, &r)
        .and_then(|_| write_run_info(&dir, &command_line()))
        .map_err(Failure::runtime)?;
    out!("{}", tables::sweep_table(&r));
    outln!("results in {}", dir.display());
    if r.rows.iter().any(|row| !row.report.valid) {
        eprintln!("error: some sweep points had too many failed runs");
        return Ok(ExitCode::from(EXIT_RUNTIME));
    }
    Ok(ExitCode::SUCCESS)
}

fn rerender(dir: &Path, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let saved = load_saved(dir)
        .with_context(|| format!("reading saved results from {}", dir.display()))
        .map_err(Failure::Runtime)?;
    match out {
        Some(out) => {
            write_rendered(out, &saved).map_err(Failure::runtime)?;
            outln!("tables in {}", out.display());
        }
        None => {
            for (name, content) in render(&saved) {
                outln!("# {name}");
                out!("{content}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
