use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ntn_offload::benders::Mode;
use ntn_offload::harness::{
    parse_config, run_convergence, run_sweep, solve_single, validate_config, ExperimentConfig,
    HarnessError,
};

/// Joint task-offloading and airtime optimizer for LEO-backed HUE networks.
#[derive(Parser)]
#[command(name = "ntn-offload", version, about)]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides NTN_OFFLOAD_OUTPUT_DIR and the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the first configured cell and print the solution as JSON.
    Solve {
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the decision-space mode.
        #[arg(long, value_enum)]
        mode: Option<CliMode>,
        /// Override the bound-gap stop tolerance in bit/s.
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
    },
    /// Write the bound trace of the first configured cell to convergence.csv.
    Convergence,
    /// Run the full scheme sweep and write results.csv and means.csv.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Paper,
    Relaxed,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Mode {
        match m {
            CliMode::Paper => Mode::Paper,
            CliMode::Relaxed => Mode::Relaxed,
        }
    }
}

fn exit_code_for(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::Solver(_) | HarnessError::SweepFailures { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => {
            let config = ExperimentConfig::default();
            validate_config(&config)?;
            config
        }
    };
    if let Some(dir) = cli
        .output
        .clone()
        .or_else(|| std::env::var_os("NTN_OFFLOAD_OUTPUT_DIR").map(PathBuf::from))
    {
        config.output_dir = dir;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        // A duplicate initialization only happens in tests; ignore it.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit_code_for(&e);
        }
    };
    let result = match cli.cmd {
        Cmd::Solve {
            seed,
            mode,
            epsilon,
        } => {
            let mut config = config;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            if let Some(mode) = mode {
                config.mode = mode.into();
            }
            if let Some(epsilon) = epsilon {
                config.epsilon = epsilon;
            }
            // overrides can break invariants the config file satisfied
            validate_config(&config).and_then(|()| {
                solve_single(&config).map(|(sol, iterations)| {
                    let report = serde_json::json!({
                        "y_bitmask_hex": sol.y.bitmask_hex(),
                        "num_offloaded": sol.y.num_offloaded(),
                        "objective_bps": sol.objective_bps,
                        "local_bps": sol.breakdown.local_bps,
                        "offload_bps": sol.breakdown.offload_bps,
                        "backhaul_bps": sol.breakdown.backhaul_bps,
                        "tau_u_s": sol.alloc.tau_u,
                        "iterations": iterations,
                    });
                    println!("{}", serde_json::to_string_pretty(&report).expect("plain JSON"));
                })
            })
        }
        Cmd::Convergence => run_convergence(&config).map(|path| {
            println!("wrote {}", path.display());
        }),
        Cmd::Sweep => run_sweep(&config).and_then(|report| {
            println!(
                "wrote {} ({} rows) and {}",
                report.results_path.display(),
                report.rows,
                report.means_path.display()
            );
            if report.failed_cells > 0 {
                return Err(HarnessError::SweepFailures {
                    failed: report.failed_cells,
                });
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            exit_code_for(&e)
        }
    }
}
