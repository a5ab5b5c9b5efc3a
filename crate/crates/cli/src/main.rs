use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use tieflow::netmodel::{Case, ShiftError};
use tieflow::oracle::{grid_search, GridSpec, OracleError};
use tieflow::report::{self, Comparison, CostMapSummary, Score, Summary};
use tieflow::stochastic::{expected_cost, EstimateError};
use tieflow::{load_case, run_aibis, run_ce, run_sibis, sample_scenarios, CaseError, Mode, Network, ScheduleError};
use tieflow::{SchedulerConfig, Status};

const EXIT_FAILURE: u8 = 1;
const EXIT_CASE: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_MAX_CYCLES: u8 = 5;

#[derive(Parser)]
#[command(
    name = "tieflow",
    version,
    about = "Multi-area interchange scheduling under uncertain net load"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scheduler and write trace.csv, summary.json and timing.json.
    Run(RunArgs),
    /// Grid-search the expected cost and write costmap.csv and costmap.json.
    Oracle(OracleArgs),
    /// Score run summaries on a fresh scenario set and write compare.json.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// Case file.
    #[arg(long)]
    case: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "sibis")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo sample count M.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Cycle termination threshold on ||q(k) - q(k-1)||, MW.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Width of the final bisection bracket, MW.
    #[arg(long, default_value_t = 1e-5)]
    bisection_tol: f64,
    #[arg(long, default_value_t = 50)]
    max_cycles: usize,
    /// Time steps for aibis.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Starting interchange, comma separated; overrides the case file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q0: Option<Vec<f64>>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Grid step over the interface bounds, MW.
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Seed of the fresh out-of-sample scenario set.
    #[arg(long, default_value_t = 1_000_003)]
    seed: u64,
    /// Size of the out-of-sample scenario set.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Summaries to compare (at least two).
    #[arg(required = true, num_args = 2..)]
    summaries: Vec<PathBuf>,
}

fn open_case(path: &Path) -> anyhow::Result<(Case, Network)> {
    let case = load_case(path)?;
    let net = Network::new(case.system.clone()).with_context(|| format!("case {}", path.display()))?;
    Ok((case, net))
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    let out = &args.common.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (case, net) = open_case(&args.common.case)?;
    let cfg = SchedulerConfig {
        mode: args.mode,
        epsilon: args.epsilon,
        bisection_tol: args.bisection_tol,
        max_cycles: args.max_cycles,
        samples: args.samples,
        seed: args.seed,
        horizon: args.horizon,
        q0: args.q0.or_else(|| case.q0.clone()),
    };
    let start = Instant::now();
    let trace = match cfg.mode {
        Mode::Sibis => run_sibis(&net, &case.model, &cfg)?,
        Mode::Ce => run_ce(&net, &case.model, &cfg)?,
        Mode::Aibis => run_aibis(&net, &case.models_by_time(cfg.horizon), &cfg)?,
    };
    let wall = start.elapsed().as_secs_f64();

    report::write_trace_csv(create(out, "trace.csv")?, &case.system, &trace)?;
    let summary = Summary::new(&case, &cfg, &trace.initial_q, &trace);
    write(out, "summary.json", &summary.to_json())?;
    write(out, "timing.json", &format!("{{\n  \"wall_time_s\": {wall:.3}\n}}\n"))?;
    log::info!(
        "{} {:?} after {} rounds: q = {:?}, expected cost {}",
        cfg.mode.as_str(),
        trace.status,
        trace.rounds,
        summary.q,
        summary.expected_cost
    );
    Ok(if trace.status == Status::MaxCycles {
        EXIT_MAX_CYCLES
    } else {
        0
    })
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<u8> {
    let out = &args.common.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (case, net) = open_case(&args.common.case)?;
    if args.grid_step.is_nan() || args.grid_step <= 0.0 {
        bail!("--grid-step must be positive");
    }
    let scenarios = sample_scenarios(&case.model, args.samples, args.seed)?;
    let spec = GridSpec::full(&case.system, args.grid_step)?;
    let map = grid_search(&net, &scenarios, &spec)?;
    report::write_costmap_csv(create(out, "costmap.csv")?, &case.system, &map)?;
    let summary = CostMapSummary::new(&case, args.seed, args.samples, &map);
    write(out, "costmap.json", &summary.to_json())?;
    log::info!("argmin {:?}, expected cost {}", summary.argmin, summary.min_cost);
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<u8> {
    let out = &args.common.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (case, net) = open_case(&args.common.case)?;
    let mut summaries = Vec::with_capacity(args.summaries.len());
    for path in &args.summaries {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let summary: Summary =
            serde_json::from_str(&text).with_context(|| format!("{} is not a run summary", path.display()))?;
        if summary.provenance.case_hash != case.hash {
            bail!(
                "{} was produced from a different case than {}",
                path.display(),
                args.common.case.display()
            );
        }
        summaries.push((path.display().to_string(), summary));
    }
    let fresh = sample_scenarios(&case.model, args.samples, args.seed)?;
    let scores = summaries
        .iter()
        .map(|(_, s)| {
            expected_cost(&net, &s.q, &fresh).map(|c| Score {
                mean: c.mean,
                stderr: c.stderr,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = Comparison::new(&summaries, &scores, args.seed, args.samples)?;
    write(out, "compare.json", &comparison.to_json())?;
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<CaseError>().is_some() || cause.downcast_ref::<ShiftError>().is_some() {
            return EXIT_CASE;
        }
        if let Some(e) = cause.downcast_ref::<ScheduleError>() {
            if e.is_infeasible() {
                return EXIT_INFEASIBLE;
            }
        }
        if let Some(e) = cause.downcast_ref::<EstimateError>() {
            if e.is_infeasible() {
                return EXIT_INFEASIBLE;
            }
        }
        if matches!(cause.downcast_ref::<OracleError>(), Some(OracleError::AllInfeasible)) {
            return EXIT_INFEASIBLE;
        }
    }
    EXIT_FAILURE
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("TIEFLOW_THREADS") {
        let n: usize = value
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .with_context(|| format!("TIEFLOW_THREADS must be a positive integer, got {value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Compare(args) => cmd_compare(args),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
