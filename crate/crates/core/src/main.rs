use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use safronov::experiments;
use safronov::{DiagnosticsReport, Error, RunConfig};

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Truncated Safronov-Dubovski aggregation: runs, sweeps and self-tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one config and write trajectory.csv and diagnostics.csv.
    Run { config: PathBuf },
    /// Sweep truncation sizes and write deficit.csv.
    Converge {
        config: PathBuf,
        /// Comma-separated increasing sizes, e.g. 32,64,128.
        #[arg(long)]
        n: String,
    },
    /// Build the convex weight for the config's initial data and write gamma.csv.
    Gamma { config: PathBuf },
    /// Randomized identity battery; prints the report to stdout.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
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
    match execute(cli.command) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::CheckFailure) => ExitCode::from(EXIT_CHECK_FAILURE),
        Ok(Status::NumericFailure) => ExitCode::from(EXIT_NUMERIC),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_USAGE
            })
        }
    }
}

fn print_failures(report: &DiagnosticsReport) {
    for e in report.failures() {
        eprintln!(
            "FAIL {}: value {} (bound {:?}, tolerance {})",
            e.id, e.value, e.bound, e.tolerance
        );
    }
}

enum Status {
    Pass,
    CheckFailure,
    NumericFailure,
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::CheckFailure
    }
}

fn execute(command: Command) -> Result<Status, Error> {
    match command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = experiments::run(&cfg)?;
            print_failures(&out.report);
            println!("wrote {}", out.trajectory_path.display());
            println!("wrote {}", out.diagnostics_path.display());
            Ok(status(out.report.all_pass()))
        }
        Command::Converge { config, n } => {
            let cfg = RunConfig::load(&config)?;
            let n_list = experiments::parse_n_list(&n)?;
            let profile = cfg.kernel.cross_decay_profile(1, &n_list)?;
            for (n, rate) in &profile.points {
                eprintln!("cross-decay phi({n}, 1) = {rate}");
            }
            if !profile.appears_decaying() {
                eprintln!("note: phi(n, 1) does not decay over this sweep");
            }
            let table = experiments::converge(&cfg.kernel, &cfg.ic, &cfg.options, &n_list)?;
            let path = experiments::write_deficit(&cfg.out_dir, &table)?;
            print!("{}", table.to_csv());
            println!("wrote {}", path.display());
            if !table.all_succeeded() {
                return Ok(Status::NumericFailure);
            }
            Ok(status(table.consistent()))
        }
        Command::Gamma { config } => {
            let cfg = RunConfig::load(&config)?;
            let (_, report, path) = experiments::gamma_command(&cfg)?;
            print_failures(&report);
            println!("wrote {}", path.display());
            Ok(status(report.all_pass()))
        }
        Command::Selftest { seed } => {
            let report = experiments::selftest(seed)?;
            print!("{}", report.to_csv());
            print_failures(&report);
            Ok(status(report.all_pass()))
        }
    }
}
