//! Command-line driver: solve, validate, bench and gen subcommands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lpreg::error::Error;
use lpreg::homotopy::{self, FinalX, HomotopyConfig, SolverKind};
use lpreg::{acceptance, matrix, LpProblem};

#[derive(Parser)]
#[command(name = "lpreg", version, about = "Homotopy solver for lp-norm regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance read from a Matrix Market file and two vector files.
    Solve {
        /// Matrix Market file holding A
        #[arg(long)]
        matrix: PathBuf,
        /// Plain-text vector file holding b (one value per line)
        #[arg(long)]
        b: PathBuf,
        /// Plain-text vector file holding c
        #[arg(long)]
        c: PathBuf,
        /// Norm exponent, p > 1
        #[arg(long)]
        p: f64,
        /// Target additive objective accuracy
        #[arg(long)]
        eps: f64,
        /// Inner solver: agd-dense, agd-sparse or katyusha
        #[arg(long, default_value = "agd-dense")]
        solver: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON report
        #[arg(long)]
        out: PathBuf,
        /// Optional file for the solution vector; the report then references it
        #[arg(long)]
        x_out: Option<PathBuf>,
        /// Inner solves run to relative gap n^(-EXP)
        #[arg(long, default_value_t = 6)]
        inner_tol_exp: u32,
        #[arg(long, default_value_t = 10_000)]
        max_phases: usize,
    },
    /// Run the numerical certification suites and print a pass/fail table.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// quick or full
        #[arg(long, default_value = "quick")]
        suite: String,
    },
    /// Per-phase iteration counts over generated instances, as CSV.
    Bench {
        /// Comma-separated exponents, e.g. 1.5,3,4,8
        #[arg(long, value_delimiter = ',', required = true)]
        p_list: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a random instance and write A.mtx, b.txt, c.txt.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        /// Keep probability for entries of A; stored sparse when below 1
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Files are written as <prefix>A.mtx, <prefix>b.txt, <prefix>c.txt
        #[arg(long)]
        out_prefix: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => 2,
        _ => 1,
    }
}

fn write_report(path: &PathBuf, report: &homotopy::SolveReport) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[allow(clippy::too_many_arguments)] // mirrors the flag surface
fn cmd_solve(
    matrix: PathBuf,
    b: PathBuf,
    c: PathBuf,
    p: f64,
    eps: f64,
    solver: String,
    seed: u64,
    out: PathBuf,
    x_out: Option<PathBuf>,
    inner_tol_exp: u32,
    max_phases: usize,
) -> Result<(), Error> {
    let solver_kind: SolverKind = solver.parse()?;
    let problem = LpProblem::load(&matrix, &b, &c, p)?;
    let mut config = HomotopyConfig::new(eps);
    config.solver_kind = solver_kind;
    config.seed = seed;
    config.inner_tolerance_exponent = inner_tol_exp;
    config.max_phases = max_phases;
    match homotopy::run(&problem, &config) {
        Ok(mut report) => {
            if let Some(x_path) = &x_out {
                if let Some(x) = report.final_x_vector() {
                    matrix::write_vector(x_path, &x)?;
                    report.final_x = FinalX::Path(x_path.display().to_string());
                }
            }
            write_report(&out, &report)?;
            let objective = report.phases.last().map(|ph| ph.objective);
            println!(
                "solved: n={} d={} p={} phases={} objective={}",
                report.problem.n,
                report.problem.d,
                report.problem.p,
                report.phases.len(),
                objective.map(|o| o.to_string()).unwrap_or_else(|| "n/a".into())
            );
            Ok(())
        }
        Err(Error::MaxPhases { max_phases, report }) => {
            write_report(&out, &report)?;
            Err(Error::NonConvergence {
                phase: Some(report.phases.len()),
                msg: format!("phase cap {max_phases} reached; partial report written"),
            })
        }
        Err(e) => Err(e),
    }
}

fn cmd_validate(seed: u64, suite: String) -> Result<bool, Error> {
    let results = match suite.as_str() {
        "quick" => acceptance::run_quick(seed)?,
        "full" => acceptance::run_full(seed)?,
        other => {
            return Err(Error::Parameter(format!(
                "unknown suite '{other}' (expected quick or full)"
            )))
        }
    };
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(8);
    println!("{:width$}  {:6}  detail", "check", "status");
    let mut all_pass = true;
    for r in &results {
        all_pass &= r.pass;
        println!("{:width$}  {:6}  {}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    Ok(all_pass)
}

fn cmd_bench(
    p_list: Vec<f64>,
    n: usize,
    d: usize,
    trials: usize,
    seed: u64,
    out: PathBuf,
) -> Result<(), Error> {
    let mut csv = String::from("p,n,d,phase,inner_iters,wall_ms\n");
    for &p in &p_list {
        let rows = acceptance::bench_run(n, d, p, trials, seed)?;
        for row in rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.p, row.n, row.d, row.phase, row.inner_iters, row.wall_ms
            ));
        }
    }
    std::fs::write(&out, csv).map_err(|e| Error::Io { path: out.display().to_string(), source: e })?;
    println!("bench table written to {}", out.display());
    Ok(())
}

fn cmd_gen(n: usize, d: usize, p: f64, density: f64, seed: u64, prefix: String) -> Result<(), Error> {
    let problem = LpProblem::generate_random(n, d, p, density, seed)?;
    let a_path = PathBuf::from(format!("{prefix}A.mtx"));
    let b_path = PathBuf::from(format!("{prefix}b.txt"));
    let c_path = PathBuf::from(format!("{prefix}c.txt"));
    matrix::write_matrix_market(&a_path, problem.matrix())?;
    matrix::write_vector(&b_path, problem.b())?;
    matrix::write_vector(&c_path, problem.c())?;
    println!(
        "generated n={n} d={d} nnz={}: {} {} {}",
        problem.nnz(),
        a_path.display(),
        b_path.display(),
        c_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("LP_HOMOTOPY_THREADS") {
        match threads.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("ignoring invalid LP_HOMOTOPY_THREADS value '{threads}'"),
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { matrix, b, c, p, eps, solver, seed, out, x_out, inner_tol_exp, max_phases } => {
            cmd_solve(matrix, b, c, p, eps, solver, seed, out, x_out, inner_tol_exp, max_phases)
                .map(|()| true)
        }
        Command::Validate { seed, suite } => cmd_validate(seed, suite),
        Command::Bench { p_list, n, d, trials, seed, out } => {
            cmd_bench(p_list, n, d, trials, seed, out).map(|()| true)
        }
        Command::Gen { n, d, p, density, seed, out_prefix } => {
            cmd_gen(n, d, p, density, seed, out_prefix).map(|()| true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
