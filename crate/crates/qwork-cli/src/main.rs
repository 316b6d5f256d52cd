use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qwork_cli::config::RunConfig;
use qwork_cli::run::{run_experiment, summary_line, RunOptions};
use qwork_cli::{oracle, selftest, CliError};

/// Quantum work statistics of a driven trapped-ion oscillator, extracted by
/// Ramsey interferometry of a probe qubit.
#[derive(Parser)]
#[command(name = "qwork", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write all artifacts into a run directory.
    Run {
        /// TOML run configuration.
        config: PathBuf,
        /// Output directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Fock truncation dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Override the noise level (per-quadrature sigma).
        #[arg(long)]
        noise: Option<f64>,
        /// Skip SVG plot generation.
        #[arg(long)]
        no_plots: bool,
    },
    /// Exact brute-force line spectra and the discrete Crooks table.
    Oracle {
        /// TOML run configuration.
        config: PathBuf,
        /// Optional directory for oracle.json and crooks_table.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suites.
    Selftest,
}

fn load_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            dim,
            noise,
            no_plots,
        } => {
            let cfg = load_config(&config)?;
            let options = RunOptions {
                seed,
                dim,
                noise,
                no_plots,
            };
            let report = run_experiment(&cfg, &out, &options)?;
            println!("run complete: {}", out.display());
            println!("{}", summary_line(&report));
            if report.fit.is_none() {
                println!("note: ratio plot omitted (no fit)");
            }
            Ok(())
        }
        Command::Oracle { config, out } => {
            let cfg = load_config(&config)?;
            let report = oracle::run_oracle(&cfg)?;
            println!(
                "exact: beta = {:.6}/omega0, dF = {:.6} omega0 = {:.3} kHz",
                report.beta_internal, report.delta_f_internal, report.delta_f_khz
            );
            println!(
                "lines: {} forward, {} backward; {} matched ratios, max Crooks deviation {:.3e}",
                report.lines_forward,
                report.lines_backward,
                report.table.len(),
                report.max_relative_deviation
            );
            for row in report.table.iter().take(9) {
                println!(
                    "  W = {:+.4} omega0 ({:+8.2} kHz): ratio {:.6e}, predicted {:.6e}",
                    row.w_internal, row.w_khz, row.ratio, row.crooks_prediction
                );
            }
            if let Some(dir) = out {
                oracle::write_oracle(&report, &dir)?;
                println!("oracle artifacts written to {}", dir.display());
            }
            Ok(())
        }
        Command::Selftest => {
            let failures = selftest::run_all();
            if failures == 0 {
                println!("selftest: all suites passed");
                Ok(())
            } else {
                Err(CliError::Stage {
                    stage: "selftest",
                    source: qwork::Error::NumericalFailure {
                        context: "selftest suites",
                        residual: failures as f64,
                    },
                })
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
