use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lqo_rom::benchmark::{build_advection_diffusion, run_experiment_on, ExperimentConfig, OutputOptions};
use lqo_rom::checks::{run_suite, CheckOptions, Suite};
use lqo_rom::LqoSystem;

/// H2-optimal reduction of linear systems with quadratic output.
#[derive(Parser)]
#[command(name = "lqo-rom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balanced truncation followed by Riemannian LRBFGS for each order.
    Reduce {
        /// Experiment configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for summary.json, CSV data and reduced models.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated reduced orders, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Relative gradient tolerance.
        #[arg(long)]
        tol_grad: Option<f64>,
        /// Also write time-response CSVs.
        #[arg(long)]
        emit_plots_data: bool,
        /// Reduce a saved system (see `export`) instead of the built-in benchmark.
        #[arg(long)]
        fom: Option<PathBuf>,
    },
    /// Run randomised property checks of the numerical kernels.
    Check {
        /// Suite to run; all suites when omitted.
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Write the benchmark system as Matrix Market files plus system.json.
    Export {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> lqo_rom::Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), |p| ExperimentConfig::load(p))
}

fn run(cli: Cli) -> lqo_rom::Result<ExitCode> {
    match cli.command {
        Command::Reduce {
            config,
            out,
            orders,
            max_iter,
            tol_grad,
            emit_plots_data,
            fom,
        } => {
            let mut config = load_config(config.as_ref())?;
            if let Some(orders) = orders {
                config.benchmark.r_list = orders;
            }
            if let Some(n) = max_iter {
                config.optimizer.max_iterations = n;
            }
            if let Some(tol) = tol_grad {
                config.optimizer.tol_rel_grad = tol;
            }
            let system = match &fom {
                Some(dir) => LqoSystem::load(dir)?,
                None => build_advection_diffusion(&config.benchmark)?,
            };
            let output = OutputOptions {
                dir: Some(&out),
                emit_plots_data,
            };
            let report = run_experiment_on(&system, &config.benchmark, &config.optimizer, output)?;
            println!("full-order H2 norm {:.6e}", report.fom_h2_norm);
            let mut failed = false;
            for order in &report.orders {
                match (&order.error, order.h2_bt, order.h2_opt) {
                    (None, Some(bt), Some(opt)) => println!(
                        "r={:<3} bt={bt:.5e} opt={opt:.5e} iterations={} ({}) {:.2}s",
                        order.r,
                        order.iterations.unwrap_or(0),
                        order.termination_reason.as_deref().unwrap_or("?"),
                        order.wall_time
                    ),
                    (error, ..) => {
                        failed = true;
                        println!("r={:<3} failed: {}", order.r, error.as_deref().unwrap_or("unknown error"));
                    }
                }
            }
            println!("wrote {}", out.join("summary.json").display());
            Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Check { suite, seeds } => {
            let suites = suite.map_or_else(|| Suite::ALL.to_vec(), |s| vec![s]);
            let mut all_passed = true;
            for suite in suites {
                for outcome in run_suite(suite, CheckOptions { seeds })? {
                    all_passed &= outcome.passed;
                    println!("[{suite}] {outcome}");
                }
            }
            Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Export { config, out } => {
            let config = load_config(config.as_ref())?;
            build_advection_diffusion(&config.benchmark)?.save(&out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
