use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collapse_cli::{resolve, run, CommandKind, Overrides};
use collapse_core::NoiseMode;

/// Objective-collapse simulator for a two-state pointer in a stochastic field.
#[derive(Parser)]
#[command(name = "collapse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate theta_dot over theta for a fan of field angles.
    FlowDiagram,
    /// Integrate one trajectory and write its path.
    Simulate {
        #[arg(long, env = "COLLAPSE_THETA0", allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long, env = "COLLAPSE_PHI0", allow_negative_numbers = true)]
        phi0: Option<f64>,
    },
    /// Outcome frequencies over a grid of initial angles.
    Ensemble,
    /// Outcome frequencies for a sweep of field amplitudes.
    BornCurve,
    /// Find the field amplitude that reproduces Born statistics.
    Calibrate,
    /// Smallest correlation time that keeps collapsed states stable.
    StabilityBound,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a JSON summary from an earlier run.
    #[arg(long, global = true, env = "COLLAPSE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "COLLAPSE_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "COLLAPSE_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "COLLAPSE_TRIALS")]
    trials: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "COLLAPSE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, env = "COLLAPSE_B0", allow_negative_numbers = true)]
    b0: Option<f64>,
    #[arg(long, global = true, env = "COLLAPSE_J", allow_negative_numbers = true)]
    j: Option<f64>,
    #[arg(long, global = true, env = "COLLAPSE_N_SPINS")]
    n_spins: Option<u64>,
    #[arg(long, global = true, env = "COLLAPSE_EPSILON", allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true, env = "COLLAPSE_TAU_R", allow_negative_numbers = true)]
    tau_r: Option<f64>,
    /// frozen, per_step or poisson_resample.
    #[arg(long, global = true, env = "COLLAPSE_NOISE_MODE")]
    noise_mode: Option<NoiseMode>,
    #[arg(long, global = true, env = "COLLAPSE_DT", allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, global = true, env = "COLLAPSE_MAX_STEPS")]
    max_steps: Option<u64>,
    /// Pole threshold: runs stop once theta is this close to a pole.
    #[arg(long, global = true, env = "COLLAPSE_DELTA_THETA", allow_negative_numbers = true)]
    delta_theta: Option<f64>,
    /// Record every k-th step of `simulate` (0 = no path).
    #[arg(long, global = true, env = "COLLAPSE_RECORD_STRIDE")]
    record_stride: Option<u64>,
    #[arg(long, global = true, env = "COLLAPSE_SUBSTEPS")]
    substeps: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    let mut o = Overrides {
        seed: c.seed,
        out: c.out,
        trials: c.trials,
        threads: c.threads,
        b0: c.b0,
        j: c.j,
        n_spins: c.n_spins,
        epsilon: c.epsilon,
        tau_r: c.tau_r,
        noise_mode: c.noise_mode,
        dt: c.dt,
        max_steps: c.max_steps,
        delta_theta: c.delta_theta,
        record_stride: c.record_stride,
        substeps: c.substeps,
        ..Default::default()
    };
    let kind = match cli.command {
        Command::FlowDiagram => CommandKind::FlowDiagram,
        Command::Simulate { theta0, phi0 } => {
            o.theta0 = theta0;
            o.phi0 = phi0;
            CommandKind::Simulate
        }
        Command::Ensemble => CommandKind::Ensemble,
        Command::BornCurve => CommandKind::BornCurve,
        Command::Calibrate => CommandKind::Calibrate,
        Command::StabilityBound => CommandKind::StabilityBound,
    };
    let result = resolve(kind, c.config.as_deref(), &o).and_then(|cfg| run(kind, &cfg));
    match result {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", report.summary_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
