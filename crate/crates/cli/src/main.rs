//! Command-line front end for collective certification runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use colcert::cli_io::{run_oracle_check, run_sweep, sweep_csv, Prepared, RunConfig, SampleSet, SweepGrid};
use colcert::collective::SolveMode;
use colcert::Error;

#[derive(Parser)]
#[command(name = "colcert", version, about = "Collective robustness certificates for localized smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Relaxed,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, certify and write report.json and curve.csv.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify every point of a parameter grid and flag Pareto-dominated ones.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exhaustive-attack soundness harness.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Persist or reuse Monte Carlo sample batches.
    Samples {
        #[command(subcommand)]
        action: SamplesAction,
    },
}

#[derive(Subcommand)]
enum SamplesAction {
    /// Draw the samples a certify run would use and write them as CSV.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        path: PathBuf,
    },
    /// Certify from a sample CSV instead of drawing fresh samples.
    Import {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

enum Failure {
    Config(Error),
    Run(Error),
    Violation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::Config)
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    }
    std::fs::write(path, contents).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

fn certify_with(cfg: &RunConfig, samples: Option<SampleSet>, out: PathBuf) -> Result<(), Failure> {
    let prepared = Prepared::new(cfg).map_err(Failure::Config)?;
    let samples = match samples {
        Some(s) => s,
        None => prepared.draw_samples()?,
    };
    let report = prepared.certify(&samples)?;
    report.write_to(&out)?;
    let last = report.curve.last().expect("validated grid is nonempty");
    println!(
        "certified {} outputs; abstained {}; ACR naive {:.4}, relaxed {:.4}{}; wrote {}",
        report.predictions.len(),
        report.predictions.iter().filter(|p| p.abstained).count(),
        report.acr.naive,
        report.acr.relaxed,
        report.acr.exact.map(|a| format!(", exact {a:.4}")).unwrap_or_default(),
        out.display()
    );
    println!("largest budget {}: naive {}, relaxed {}", last.epsilon, last.naive.all, last.relaxed.all);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Certify { config, seed, mode, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    Mode::Relaxed => SolveMode::Relaxed,
                    Mode::Exact => SolveMode::Exact,
                };
            }
            let out = out_dir(&cfg, out);
            certify_with(&cfg, None, out)
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load_config(&config)?;
            let grid = SweepGrid::load(&grid).map_err(Failure::Config)?;
            let rows = run_sweep(&cfg, &grid).map_err(|e| match e {
                Error::Config(_) => Failure::Config(e),
                other => Failure::Run(other),
            })?;
            let path = out_dir(&cfg, out).join("sweep.csv");
            write(&path, &sweep_csv(&rows)?)?;
            let front = rows.iter().filter(|r| !r.dominated).count();
            println!("{} points, {front} on the Pareto front; wrote {}", rows.len(), path.display());
            Ok(())
        }
        Command::OracleCheck { config } => {
            let cfg = load_config(&config)?;
            let report = run_oracle_check(&cfg)?;
            let h = &report.harness;
            println!("harness: {} instances, {} violations", h.outcomes.len(), h.violations.len());
            println!("fixture: {} budgets, {} violations", report.fixtures.len(), report.fixture_violations.len());
            if let Some(note) = &report.fixture_note {
                println!("fixture note: {note}");
            }
            for v in &h.violations {
                println!("violation [{}] harness instance {}: {}", v.kind, v.instance, v.detail);
            }
            for v in &report.fixture_violations {
                let budget = report.fixtures[v.instance].budget;
                println!("violation [{}] fixture budget {budget:?}: {}", v.kind, v.detail);
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Violation)
            }
        }
        Command::Samples { action: SamplesAction::Export { config, path } } => {
            let cfg = load_config(&config)?;
            let samples = Prepared::new(&cfg).map_err(Failure::Config)?.draw_samples()?;
            let mut buf = Vec::new();
            samples.write_csv(&mut buf)?;
            write(&path, &String::from_utf8(buf).expect("csv output is utf-8"))?;
            println!("wrote {} batches to {}", samples.batches.len(), path.display());
            Ok(())
        }
        Command::Samples { action: SamplesAction::Import { config, path, out } } => {
            let cfg = load_config(&config)?;
            let file =
                std::fs::File::open(&path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            let samples = SampleSet::read_csv(std::io::BufReader::new(file))?;
            let out = out_dir(&cfg, out);
            certify_with(&cfg, Some(samples), out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => {
            eprintln!("oracle check failed");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Config(e)) | Err(Failure::Run(e @ (Error::Config(_) | Error::Toml(_)))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e @ Error::Capacity(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CAPACITY)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
