use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bench::error::BenchError;
use bench::experiment::{compare_once, parse_grid, run_experiment, write_rows, ExperimentConfig};
use bench::io::{load_problem, write_matrix, MeasureSource};
use screenkhorn::{
    decimation_to_budget, screenkhorn_with, BoundsVariant, DiscreteMeasure, ScreenkhornOptions, SinkhornConfig,
    SolverConfig,
};

#[derive(Parser)]
#[command(name = "bench", about = "Screened Sinkhorn benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep eta, budget and trials on synthetic Gaussian data and write a results CSV.
    Run(RunArgs),
    /// Solve one problem loaded from CSV and write the plan.
    Solve(SolveArgs),
    /// Baseline Sinkhorn versus screened solve on one loaded problem.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Projected-gradient stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pg_tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    /// Use the tight box bounds instead of the guarded ones.
    #[arg(long)]
    tight_bounds: bool,
}

impl SolverArgs {
    fn options(&self, materialize_plan: bool) -> ScreenkhornOptions {
        ScreenkhornOptions {
            bounds: if self.tight_bounds {
                BoundsVariant::Tight
            } else {
                BoundsVariant::Guarded
            },
            solver: SolverConfig {
                pg_tolerance: self.pg_tolerance,
                max_iterations: self.max_iterations,
                ..Default::default()
            },
            materialize_plan,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    /// Comma list or start:stop:step.
    #[arg(long, default_value = "0.1,0.5,1,5")]
    eta: String,
    /// Comma list or start:stop:step, each in (0, 1].
    #[arg(long, default_value = "0.01:0.99:0.05")]
    budget: String,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Scale the cost so its largest entry is 1.
    #[arg(long)]
    normalize_cost: bool,
    /// Check the bounds and certificates on every converged row.
    #[arg(long)]
    certify: bool,
    /// Parallel trial workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ProblemArgs {
    /// CSV with header `index,mu,nu`.
    #[arg(long, conflicts_with_all = ["mu", "nu"], required_unless_present_all = ["mu", "nu"])]
    measures: Option<PathBuf>,
    /// CSV with header `index,mu`.
    #[arg(long, requires = "nu")]
    mu: Option<PathBuf>,
    /// CSV with header `index,nu`.
    #[arg(long, requires = "mu")]
    nu: Option<PathBuf>,
    /// Headerless n x m cost CSV.
    #[arg(long)]
    cost: PathBuf,
    #[arg(long)]
    eta: f64,
    /// Fraction of rows and columns kept active.
    #[arg(long)]
    budget: f64,
}

impl ProblemArgs {
    fn load(&self) -> Result<(DiscreteMeasure, DiscreteMeasure, screenkhorn::CostMatrix), BenchError> {
        let source = match (&self.measures, &self.mu, &self.nu) {
            (Some(p), _, _) => MeasureSource::Combined(p),
            (None, Some(mu), Some(nu)) => MeasureSource::Split { mu, nu },
            _ => return Err(BenchError::Input("pass --measures or both --mu and --nu".into())),
        };
        load_problem(source, &self.cost)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Plan CSV, same shape as the cost.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Results CSV with a single row; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    certify: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

fn run(args: RunArgs) -> Result<(), BenchError> {
    let cfg = ExperimentConfig {
        n: args.n,
        m: args.m,
        eta_list: parse_grid(&args.eta)?,
        budget_list: parse_grid(&args.budget)?,
        trials: args.trials,
        seed: args.seed,
        normalize_cost: args.normalize_cost,
        output_path: args.out.clone(),
        certify: args.certify,
        jobs: args.jobs,
        sinkhorn: SinkhornConfig::default(),
        screenkhorn: args.solver.options(false),
    };
    let outcome = run_experiment(&cfg)?;
    if args.out.is_none() {
        write_rows(std::io::stdout().lock(), &outcome.rows)?;
    }
    let unconverged = outcome.rows.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        eprintln!("{unconverged} of {} rows did not converge", outcome.rows.len());
    }
    report_certificates(&outcome.certificates)
}

fn report_certificates(reports: &[bench::experiment::CertificateReport]) -> Result<(), BenchError> {
    let mut failures = 0;
    for r in reports.iter().filter(|r| !r.passed()) {
        failures += 1;
        if !r.contained {
            eprintln!("eta {} budget {} trial {}: potentials outside the box", r.eta, r.budget, r.trial);
        }
        for c in r.certificates.iter().filter(|c| !c.satisfied) {
            eprintln!(
                "eta {} budget {} trial {}: {} empirical {:e} > bound {:e}",
                r.eta, r.budget, r.trial, c.name, c.empirical_value, c.bound_value
            );
        }
    }
    if failures > 0 {
        return Err(BenchError::Certificate(failures));
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), BenchError> {
    let (mu, nu, cost) = args.problem.load()?;
    let (n, m) = cost.dim();
    let (n_b, m_b) = decimation_to_budget(n, m, args.problem.budget)?;
    let result = screenkhorn_with(&cost, args.problem.eta, &mu, &nu, n_b, m_b, &args.solver.options(true))?;
    let plan = result.plan.as_ref().expect("plan requested");
    write_matrix(&args.out, plan.entries())?;
    let report = &result.solver_report;
    eprintln!(
        "kappa {:e} epsilon {:e} active {}x{} iterations {} pg {:e}",
        result.kappa(),
        result.epsilon(),
        result.screening.active_rows.len(),
        result.screening.active_cols.len(),
        report.iterations,
        report.projected_gradient_inf_norm
    );
    if !result.converged() {
        return Err(BenchError::NotConverged(format!(
            "{:?} after {} iterations",
            report.termination, report.iterations
        )));
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), BenchError> {
    let (mu, nu, cost) = args.problem.load()?;
    let c = compare_once(
        &cost,
        &mu,
        &nu,
        args.problem.eta,
        args.problem.budget,
        &SinkhornConfig::default(),
        &args.solver.options(false),
        0,
        0,
    )?;
    match &args.out {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| BenchError::Io {
                path: p.display().to_string(),
                source,
            })?;
            write_rows(file, std::slice::from_ref(&c.row))?
        }
        None => write_rows(std::io::stdout().lock(), std::slice::from_ref(&c.row))?,
    }
    if args.certify {
        if let Some(result) = c.screened.as_ref().filter(|r| r.converged()) {
            let (contained, certificates) = bench::experiment::certify(result, &c.kernel, &mu, &nu)?;
            report_certificates(&[bench::experiment::CertificateReport {
                eta: c.row.eta,
                budget: c.row.budget,
                trial: 0,
                contained,
                certificates,
            }])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Solve(a) => solve(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
