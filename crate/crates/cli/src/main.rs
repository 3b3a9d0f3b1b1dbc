use std::path::PathBuf;
use std::process::ExitCode;

use cgdae::study::{run_study, write_csv, Baseline, ProblemKind, StudyConfig};
use cgdae::PointFamily;
use clap::{Parser, Subcommand};

const NEWTON_TOL_VAR: &str = "CGDAE_NEWTON_TOL";

#[derive(Parser, Debug)]
#[command(name = "cgdae", version, about = "Continuous Galerkin DAE integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a convergence study and write the error table as CSV.
    Study(StudyArgs),
}

#[derive(clap::Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    degrees: Vec<usize>,
    /// Coarsest step size; defaults to the problem's ladder.
    #[arg(long)]
    dt0: Option<f64>,
    /// Number of step sizes, halving each time.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value = "equispaced")]
    family: PointFamily,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, value_delimiter = ',')]
    baseline: Vec<Baseline>,
    /// Override the problem's end time.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn newton_tol_from_env() -> Result<Option<f64>, String> {
    match std::env::var(NEWTON_TOL_VAR) {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(tol) if tol > 0.0 && tol.is_finite() => Ok(Some(tol)),
            _ => Err(format!("{NEWTON_TOL_VAR}={s:?} is not a positive number")),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{NEWTON_TOL_VAR}: {e}")),
    }
}

fn study(args: StudyArgs) -> Result<bool, String> {
    let mut cfg = StudyConfig::new(args.problem);
    cfg.degrees = args.degrees;
    if let Some(dt0) = args.dt0 {
        cfg.dt0 = dt0;
    }
    if let Some(levels) = args.levels {
        cfg.levels = levels;
    }
    cfg.family = args.family;
    cfg.c1 = args.c1;
    cfg.c2 = args.c2;
    cfg.baselines = args.baseline;
    cfg.t_end = args.t_end;
    if let Some(tol) = newton_tol_from_env()? {
        cfg.newton.tol_residual = tol;
    }

    let table = run_study(&cfg).map_err(|e| e.to_string())?;
    write_csv(&table, &args.out).map_err(|e| e.to_string())?;
    for row in table.rows.iter().filter(|r| r.failed()) {
        log::warn!(
            "{} r={} {} dt={}: {}",
            row.problem,
            row.r,
            row.family,
            row.dt,
            row.failure.as_deref().unwrap_or("failed")
        );
    }
    log::info!("wrote {} rows to {}", table.rows.len(), args.out.display());
    Ok(!table.any_failed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which is reserved for failed runs
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Study(args) => study(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
