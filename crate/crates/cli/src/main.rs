//! `horizonlab` — train autoregressive forecasters of dynamical systems
//! and measure the loss-landscape quantities that govern horizon choice.
//!
//! Exit codes: 0 ok, 2 usage/config error, 3 numeric divergence,
//! 4 ingestion error. `HORIZONLAB_THREADS` caps the worker count
//! (0 or unset = automatic).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use horizonlab_core::dynamics::Method;
use horizonlab_core::Error as CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "horizonlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a built-in system and write the trajectory CSV + metadata.
    Simulate {
        #[arg(long)]
        system: String,
        /// Comma-separated free parameters (defaults to the paper values).
        #[arg(long, value_parser = parse_f64_list)]
        params: Option<Vec<f64>>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated initial state (defaults to the system's own).
        #[arg(long, value_parser = parse_f64_list)]
        x0: Option<Vec<f64>>,
        /// Observation noise σ added after integration.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Hopf-normal-form variant of the limit cycle.
        #[arg(long, default_value_t = false)]
        hopf: bool,
        #[arg(long, default_value = "dopri5")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate an external trajectory CSV (header t,x0..x{D-1}).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = false)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lyapunov spectrum of a built-in system (tangent-frame QR method).
    Lyapunov {
        #[arg(long)]
        system: String,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        #[arg(long, default_value_t = 300)]
        discard: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = false)]
        hopf: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model per a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Horizon-curriculum training per a JSON config.
    Curriculum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Grid sweep over horizon × learning rate × noise × size.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Landscape probes (grad_ratio, roughness, hessian_ratio, gen_ratio,
    /// scan, eps_check) per a JSON config.
    Probe {
        #[arg(long)]
        config: PathBuf,
    },
    /// Iterative horizon/learning-rate scheduling per a JSON config.
    Schedule {
        #[arg(long)]
        config: PathBuf,
    },
}

fn setup_threads() {
    if let Ok(v) = std::env::var("HORIZONLAB_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Exit-code mapping: usage/config 2, divergence 3, ingestion 4, other 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Divergence { .. } => 3,
                CoreError::Ingestion { .. } => 4,
                CoreError::Argument(_) | CoreError::NoVectorField(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    let msg = format!("{err}");
    if msg.contains("config") || msg.contains("section") || msg.contains("no built-in") {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            system,
            params,
            dt,
            steps,
            seed,
            x0,
            sigma,
            hopf,
            method,
            out,
        } => commands::cmd_simulate(
            &system,
            params,
            dt,
            steps,
            seed,
            x0,
            sigma,
            hopf,
            Method::parse(&method)?,
            &out,
        ),
        Command::Ingest { input, normalize, out } => commands::cmd_ingest(&input, normalize, &out),
        Command::Lyapunov {
            system,
            dt,
            steps,
            discard,
            seed,
            hopf,
            out,
        } => commands::cmd_lyapunov(&system, dt, steps, discard, seed, hopf, &out),
        Command::Train { config } => commands::cmd_train(&config),
        Command::Curriculum { config } => commands::cmd_curriculum(&config),
        Command::Sweep { config } => commands::cmd_sweep(&config),
        Command::Probe { config } => commands::cmd_probe(&config),
        Command::Schedule { config } => commands::cmd_schedule(&config),
    }
}

fn main() -> ExitCode {
    setup_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
