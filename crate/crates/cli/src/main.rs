//! `macont`: decide and diagnose equivalence of two measures from a model file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use macont_core::report::{self, Mode, Report, RunConfig};
use macont_core::{AtomBudget, Error, Measure};

/// Exit statuses other than the decision codes (0, 10, 20) and verify failure (30).
mod exit {
    pub const MODEL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const BUDGET: u8 = 4;
    pub const INTERNAL: u8 = 5;
}

#[derive(Parser, Debug)]
#[command(name = "macont", version, about = "Equivalence and singularity of measure pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide equivalence and report affinity tables and invariants.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        kmax: usize,
        /// JSON report path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Affinity table CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the invariant suite; exit 0 iff every check passes.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-decide across values of one tail-family parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        kmax: usize,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// CSV path, one row per value.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample paths and summarize the density process.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MeasureArg::P)]
        measure: MeasureArg,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Trace CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON summary path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureArg {
    P,
    Q,
}

fn config(mode: Mode, common: &Common) -> RunConfig {
    let mut c = RunConfig::new(mode, &common.model);
    c.depth = common.depth;
    c.tol = common.tol;
    c.atom_budget = AtomBudget::from_env().0;
    c
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Io(_) => exit::MODEL,
        Error::Validation { .. } => exit::VALIDATION,
        Error::BudgetExceeded { .. } => exit::BUDGET,
        Error::InconsistentCriteria(_) | Error::EngineMismatch(_) => exit::INTERNAL,
        Error::InvalidArgument(_)
        | Error::DepthExceeded { .. }
        | Error::ContinuousCoordinate(_)
        | Error::IndexOutOfRange { .. }
        | Error::NotMarkov
        | Error::NotProduct => exit::USAGE,
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(p) => report::write_file(p, &report.to_json()),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let report = match cli.command {
        Command::Analyze { common, kmax, out, csv } => {
            let mut c = config(Mode::Analyze, &common);
            c.k_max = kmax;
            c.out = out.clone();
            c.csv = csv.clone();
            let r = report::run_analyze(&c)?;
            if let Some(p) = &csv {
                report::write_file(p, &r.tables_csv())?;
            }
            emit(&r, out.as_ref())?;
            r
        }
        Command::Verify { common, out } => {
            let mut c = config(Mode::Verify, &common);
            c.out = out.clone();
            let r = report::run_verify(&c)?;
            for check in r.invariants.iter().filter(|c| !c.passed) {
                eprintln!(
                    "FAIL {}: {} of {} ({})",
                    check.name,
                    check.failures,
                    check.checked,
                    check.first_failure.as_deref().unwrap_or("")
                );
            }
            emit(&r, out.as_ref())?;
            r
        }
        Command::Sweep { common, kmax, param, values, out } => {
            let mut c = config(Mode::Sweep, &common);
            c.k_max = kmax;
            c.param = Some(param);
            c.values = values;
            c.out = Some(out.clone());
            let r = report::run_sweep(&c)?;
            report::write_file(&out, &r.sweep_csv())?;
            // the sweep's own exit status is not a decision
            return Ok(0);
        }
        Command::Sample { common, measure, length, count, seed, csv, out } => {
            let mut c = config(Mode::Sample, &common);
            c.measure = match measure {
                MeasureArg::P => Measure::P,
                MeasureArg::Q => Measure::Q,
            };
            c.length = length;
            c.count = count;
            c.seed = Some(seed);
            c.csv = csv.clone();
            c.out = out.clone();
            let (r, traces) = report::run_sample(&c)?;
            if let Some(p) = &csv {
                report::write_file(p, &macont_core::montecarlo::traces_to_csv(&traces))?;
            }
            emit(&r, out.as_ref())?;
            return Ok(0);
        }
    };
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
