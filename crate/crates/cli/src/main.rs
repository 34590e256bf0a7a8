use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flipdyn::examples::BundledExample;
use flipdyn::output::{self, OutputFormat};
use flipdyn::spec_file::{parse_spec, GameSpecFile};
use flipdyn::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

/// Solve, simulate and verify finite-horizon takeover games on graphs.
///
/// Log verbosity is read from FLIPDYN_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "flipdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute saddle-point values and equilibrium policies.
    Solve {
        spec: PathBuf,
        /// Output directory; without it the JSON result goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Estimate the expected cost under the solved policies by Monte Carlo.
    Simulate {
        spec: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial state; comma-separated coordinates for grid models.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Option<Vec<f64>>,
        /// Initial node, by name or index.
        #[arg(long)]
        alpha1: Option<String>,
    },
    /// Certify the solved policies by exact best response.
    Verify {
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Write a bundled example spec.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        /// Output directory; without it the spec goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExampleName {
    Sird,
    StockMarket,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }

    fn from_error(e: Error) -> Self {
        let code = match e {
            Error::Validation(_) | Error::Spec(_) | Error::NodeOutOfRange { .. } | Error::GridIndexOutOfRange { .. } => EXIT_VALIDATION,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn load(path: &Path) -> Result<GameSpecFile, Failure> {
    parse_spec(path).map_err(|e| match e {
        Error::Validation(violations) => Failure::validation(
            std::iter::once(format!("{}: invalid spec", path.display()))
                .chain(violations.iter().map(|v| format!("  {v}")))
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        other => Failure::validation(other),
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let s = output::to_json_string(value).map_err(Failure::from_error)?;
    print!("{s}");
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve { spec, out, format } => {
            let spec = load(&spec)?;
            let bundle = output::run_solve(&spec).map_err(Failure::from_error)?;
            match out {
                Some(dir) => {
                    let format = match format {
                        Format::Json => OutputFormat::Json,
                        Format::Csv => OutputFormat::Csv,
                    };
                    output::emit(&bundle, format, &dir).map_err(Failure::from_error)?;
                    log::info!("wrote results to {}", dir.display());
                }
                None => match format {
                    Format::Json => print_json(&bundle)?,
                    Format::Csv => return Err(Failure::validation("--format csv needs --out")),
                },
            }
            Ok(0)
        }
        Command::Simulate {
            spec,
            samples,
            seed,
            x1,
            alpha1,
        } => {
            if samples == 0 {
                return Err(Failure::validation("--samples must be at least 1"));
            }
            let spec = load(&spec)?;
            let solution = output::solve(&spec).map_err(Failure::from_error)?;
            let summary = output::run_simulate(&spec, &solution, samples, seed, x1.as_deref(), alpha1.as_deref()).map_err(Failure::from_error)?;
            print_json(&summary)?;
            Ok(0)
        }
        Command::Verify { spec, tol } => {
            if tol.is_nan() || tol < 0.0 {
                return Err(Failure::validation("--tol must be non-negative"));
            }
            let spec = load(&spec)?;
            let solution = output::solve(&spec).map_err(Failure::from_error)?;
            let report = output::run_verify(&spec, &solution, tol).map_err(Failure::from_error)?;
            print_json(&report)?;
            if report.passed {
                Ok(0)
            } else {
                eprintln!("verification failed");
                Ok(EXIT_VERIFICATION)
            }
        }
        Command::Example { name, out } => {
            let example = match name {
                ExampleName::Sird => BundledExample::Sird,
                ExampleName::StockMarket => BundledExample::StockMarket,
            };
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Failure::from_error(Error::Io { path: dir.clone(), source: e }))?;
                    let path = dir.join(example.file_name());
                    std::fs::write(&path, example.source()).map_err(|e| Failure::from_error(Error::Io { path: path.clone(), source: e }))?;
                    println!("{}", path.display());
                }
                None => print!("{}", example.source()),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLIPDYN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
