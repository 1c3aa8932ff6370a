use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bethe_zeta::cli::{self, Output, RunOptions, SweepRange, VerifyKind};
use bethe_zeta::diagnostics::WeightOptions;
use bethe_zeta::experiments::ProtocolConfig;
use bethe_zeta::io::load_model;
use bethe_zeta::lbp::{InitMode, LbpConfig, Schedule};

#[derive(Parser)]
#[command(name = "bethe-zeta", version, about = "Loopy belief propagation, Bethe free energy and graph zeta functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Parallel,
    Sequential,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zeros,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    BetheZeta,
    IharaBass,
    Linearization,
    Stationarity,
}

#[derive(Subcommand)]
enum Command {
    /// Run LBP and report beliefs, convergence and stability.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "parallel")]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long, value_enum, default_value = "zeros")]
        init: InitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an identity at random samples; exit status 1 if a residual exceeds its tolerance.
    Verify {
        #[arg(value_enum)]
        which: VerifyArg,
        file: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prime cycles, zeta values, poles and spectral bounds of the factor graph.
    Zeta {
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        u: f64,
        #[arg(long, default_value_t = 8)]
        max_cycle_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// (K, J) sweep on the 3x3 factor torus: LBP convergence and both certificates.
    Grid {
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        k_min: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        j_min: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        j_max: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 30)]
        max_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W and N weights of exp(K x1x2x3 + 0.3 sum x_i x_j).
    Wn {
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        k_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuation of the fixed point of t * template for t in [0, tmax].
    Trajectory {
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tmax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.25)]
        damping: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> bethe_zeta::Result<(Output, Option<PathBuf>)> {
    match command {
        Command::Run {
            file,
            schedule,
            damping,
            tol,
            max_iters,
            init,
            seed,
            out,
        } => {
            let model = load_model(&file)?;
            let opts = RunOptions {
                config: LbpConfig {
                    schedule: match schedule {
                        ScheduleArg::Parallel => Schedule::Parallel,
                        ScheduleArg::Sequential => Schedule::Sequential { order: Vec::new() },
                    },
                    damping,
                    tol,
                    max_iters,
                },
                init: match init {
                    InitArg::Zeros => InitMode::Zeros,
                    InitArg::Random => InitMode::Random { seed, scale: 1.0 },
                },
            };
            Ok((cli::cmd_run(&model, &opts)?, out))
        }
        Command::Verify {
            which,
            file,
            samples,
            seed,
            out,
        } => {
            let model = load_model(&file)?;
            let kind = match which {
                VerifyArg::BetheZeta => VerifyKind::BetheZeta,
                VerifyArg::IharaBass => VerifyKind::IharaBass,
                VerifyArg::Linearization => VerifyKind::Linearization,
                VerifyArg::Stationarity => VerifyKind::Stationarity,
            };
            Ok((cli::cmd_verify(&model, kind, samples, seed)?, out))
        }
        Command::Zeta {
            file,
            u,
            max_cycle_len,
            out,
        } => Ok((cli::cmd_zeta(&load_model(&file)?, u, max_cycle_len)?, out)),
        Command::Grid {
            k_min,
            k_max,
            j_min,
            j_max,
            steps,
            tol,
            max_iters,
            seed,
            out,
        } => {
            let k = SweepRange { min: k_min, max: k_max, steps };
            let j = SweepRange { min: j_min, max: j_max, steps };
            let opts = WeightOptions { seed, ..WeightOptions::default() };
            Ok((cli::cmd_grid(k, j, &ProtocolConfig { tol, max_iters }, &opts)?, out))
        }
        Command::Wn {
            k_min,
            k_max,
            steps,
            seed,
            out,
        } => {
            let opts = WeightOptions { seed, ..WeightOptions::default() };
            Ok((cli::cmd_wn(SweepRange { min: k_min, max: k_max, steps }, &opts)?, out))
        }
        Command::Trajectory {
            file,
            tmax,
            steps,
            damping,
            out,
        } => Ok((cli::cmd_trajectory(&load_model(&file)?, tmax, steps, damping)?, out)),
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match execute(args.command) {
        Ok((output, out)) => {
            for note in &output.notes {
                eprintln!("{note}");
            }
            let written = match out {
                Some(path) => std::fs::write(&path, &output.document),
                None => {
                    print!("{}", output.document);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(output.outcome.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
