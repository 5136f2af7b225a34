//! `rado` — 2D spinning-radar odometry pipeline, simulator and evaluator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rado_cli::commands;
use rado_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "rado", version, about = "2D spinning-radar odometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set filter.k=8 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run odometry over a directory of .rps sweeps.
    Run {
        /// Directory containing *.rps files, consumed in lexicographic order.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for trajectory.tum and diagnostics.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare an estimated trajectory against ground truth.
    Eval {
        /// Estimated trajectory in TUM format.
        #[arg(long)]
        est: PathBuf,
        /// Ground-truth trajectory in TUM format.
        #[arg(long)]
        gt: PathBuf,
        /// Metrics report CSV.
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
        /// Segment lengths in meters for the translation/rotation errors.
        #[arg(long, value_name = "LIST")]
        segments: Option<String>,
        /// Optional per-segment error CSV for plotting.
        #[arg(long)]
        segments_csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render a synthetic sweep sequence from a world and a trajectory.
    Simulate {
        /// World landmarks as x,y,reflectivity CSV.
        #[arg(long)]
        world: PathBuf,
        /// Ground-truth trajectory in TUM format, one pose per sweep.
        #[arg(long)]
        traj: PathBuf,
        /// Output directory for NNNNNN.rps files and gt.tum.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print every config key with its default value.
    DumpConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { input, out, config } => load_config(&config)
            .and_then(|cfg| commands::cmd_run(&input, &out, &cfg)),
        Command::Eval { est, gt, out, segments, segments_csv, config } => {
            load_config(&config).and_then(|mut cfg| {
                let explicit = segments.is_some()
                    || config.set.iter().any(|s| s.starts_with("eval.segments"));
                if let Some(list) = segments {
                    cfg.apply("eval.segments", &list)?;
                }
                commands::cmd_eval(&est, &gt, &out, segments_csv.as_deref(), &cfg, explicit)
            })
        }
        Command::Simulate { world, traj, out, config } => load_config(&config)
            .and_then(|cfg| commands::cmd_simulate(&world, &traj, &out, &cfg)),
        Command::DumpConfig => {
            print!("{}", RunConfig::default().dump());
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    RunConfig::load(args.config.as_deref(), &args.set)
}
