use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fosls_core::abstract_laws;
use fosls_core::study::{self, InitialData, Problem, StudyConfig};
use fosls_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fosls",
    version,
    about = "Energy-law studies for least-squares heat and Stokes solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step the heat equation and print the energy residual per step.
    Heat(RunArgs),
    /// Time-step the Stokes equations and print the energy residual per step.
    Stokes(RunArgs),
    /// Sweep orders and levels and write a convergence table.
    Study(StudyArgs),
    /// Check the projection and energy-law identities on random surrogate models.
    AbstractCheck(AbstractArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(short = 'l', long, default_value_t = 5)]
    level: u32,
    #[arg(short = 'p', long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 0.005)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Initial data: `paper` (smooth standard data) or `zero`.
    #[arg(long, default_value = "paper")]
    u0: String,
}

#[derive(Args)]
struct StudyArgs {
    /// `heat` or `stokes`.
    problem: Option<String>,
    #[arg(short = 'l', long = "level")]
    levels: Vec<u32>,
    #[arg(short = 'p', long = "order")]
    orders: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    u0: Option<String>,
    #[arg(long)]
    rate_from_level: Option<u32>,
    /// `key=value` file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AbstractArgs {
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 16)]
    dim_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn run_single(problem: Problem, args: &RunArgs) -> Result<()> {
    let initial: InitialData = args.u0.parse()?;
    let history = study::residual_history(
        problem, args.level, args.order, args.tau, args.steps, initial,
    )?;
    println!("step,time,abs_residual");
    for (n, e) in history.iter().enumerate() {
        println!("{},{:.16e},{:.16e}", n + 1, (n + 1) as f64 * args.tau, e);
    }
    Ok(())
}

fn run_study(args: &StudyArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => {
            let problem = args
                .problem
                .as_deref()
                .ok_or_else(|| Error::Config("a problem or --config is required".into()))?
                .parse()?;
            StudyConfig::new(problem, vec![1], vec![3, 4, 5], 0.005, 1)
        }
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.parse()?;
    }
    if !args.orders.is_empty() {
        cfg.orders = args.orders.clone();
    }
    if !args.levels.is_empty() {
        cfg.levels = args.levels.clone();
    }
    if !args.tau.is_empty() {
        cfg.taus = args.tau.clone();
    }
    if !args.steps.is_empty() {
        cfg.steps = args.steps.clone();
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.clone());
    }
    if let Some(u0) = &args.u0 {
        cfg.initial = u0.parse()?;
    }
    if args.rate_from_level.is_some() {
        cfg.rate_from_level = args.rate_from_level;
    }
    let table = study::run_study(&cfg)?;
    if cfg.output_path.is_none() {
        print!("{}", table.to_csv());
    }
    Ok(())
}

fn run_abstract(args: &AbstractArgs) -> Result<bool> {
    let mut ok = true;
    for (label, invariant) in [("generic", false), ("invariant", true)] {
        let s = abstract_laws::sweep(args.seeds, args.dim_max, invariant, args.tol)?;
        let pass = s.pq_failures == 0 && s.energy_failures == 0;
        ok &= pass;
        println!(
            "{label:>9} models={} projection-identity worst={:.3e} fail={} energy-law worst={:.3e} fail={} {}",
            s.models,
            s.worst_pq_residual,
            s.pq_failures,
            s.worst_energy_gap,
            s.energy_failures,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Heat(a) => run_single(Problem::Heat, a).map(|_| true),
        Command::Stokes(a) => run_single(Problem::Stokes, a).map(|_| true),
        Command::Study(a) => run_study(a).map(|_| true),
        Command::AbstractCheck(a) => run_abstract(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
