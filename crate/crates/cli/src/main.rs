//! `graspforge`: train the residual policy, generate data, clone and evaluate.

mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Invalid invocation detected after argument parsing; exits with status 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "graspforge", version, about = "Superquadric grasp simulation, residual RL, data generation and behavior cloning")]
#[command(after_help = "Verbosity is set with GRASPFORGE_LOG=error|warn|info|debug (default info).")]
struct Cli {
    /// Worker threads for parallel rollouts, generation and evaluation
    /// [default: available cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON); see `graspforge config --emit-default`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the residual grasp policy with PPO.
    TrainRl {
        #[command(flatten)]
        common: Common,
        /// Output directory for the checkpoint, metrics and run record.
        #[arg(long)]
        out: PathBuf,
        /// Train until this many updates have been completed in total.
        #[arg(long)]
        total_updates: Option<usize>,
        /// Continue from a checkpoint; update numbering carries on.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Generate a success-filtered dataset of observable episodes.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: usize,
        /// Residual policy checkpoint from `train-rl`.
        #[arg(long, conflicts_with = "zero_residual")]
        policy: Option<PathBuf>,
        /// Run the reference skill without a residual.
        #[arg(long)]
        zero_residual: bool,
        /// Store failed episodes as well.
        #[arg(long)]
        keep_failures: bool,
    },
    /// Train a behavior-cloning policy on one or more datasets.
    TrainBc {
        #[command(flatten)]
        common: Common,
        /// Comma-separated dataset directories.
        #[arg(long, value_delimiter = ',', required = true)]
        data: Vec<PathBuf>,
        /// Output checkpoint file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Overrides `bc.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a behavior-cloning checkpoint on a set of shapes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// JSON list of `{"id": .., "phi": [a1, a2, a3, eps1, eps2]}` or of bare arrays.
        #[arg(long)]
        shapes: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Narrow vs. augmented vs. mixed behavior-cloning comparison.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Experiment spec (JSON); defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Dataset of the single training shape.
        #[arg(long)]
        narrow: PathBuf,
        /// Dataset sampled from the full shape distribution.
        #[arg(long)]
        augmented: PathBuf,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a superquadric as an OBJ mesh or a depth image (PGM).
    Render {
        /// Shape `a1,a2,a3,eps1,eps2` (m, m, m, -, -).
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        phi: Vec<f64>,
        /// `.obj` or `.pgm` file; a directory when sweeping.
        #[arg(long)]
        out: PathBuf,
        /// Write one mesh per listed `eps2`, keeping the other parameters.
        #[arg(long, value_delimiter = ',')]
        sweep_eps2: Option<Vec<f64>>,
        /// Mesh latitude and longitude resolution.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Print or write the configuration.
    Config {
        /// Print the default configuration with every key.
        #[arg(long)]
        emit_default: bool,
        /// Validate and print a configuration file with defaults filled in.
        #[arg(long, conflicts_with = "emit_default")]
        check: Option<PathBuf>,
    },
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("GRASPFORGE_LOG", "info");
    env_logger::Builder::from_env(env).format_timestamp_secs().init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        return Err(UsageError("--workers must be positive".into()).into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()?;
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::TrainRl {
            common,
            out,
            total_updates,
            resume,
        } => commands::train_rl(&argv, &common, &out, total_updates, resume.as_deref()),
        Command::GenData {
            common,
            out,
            episodes,
            policy,
            zero_residual,
            keep_failures,
        } => commands::gen_data(&argv, &common, &out, episodes, policy.as_deref(), zero_residual, keep_failures),
        Command::TrainBc {
            common,
            data,
            out,
            epochs,
        } => commands::train_bc(&argv, &common, &data, &out, epochs),
        Command::Eval {
            common,
            ckpt,
            shapes,
            trials,
            out,
        } => commands::eval(&argv, &common, &ckpt, &shapes, trials, &out),
        Command::Experiment {
            common,
            spec,
            narrow,
            augmented,
            out,
        } => commands::experiment(&argv, &common, spec.as_deref(), &narrow, &augmented, &out),
        Command::Render {
            phi,
            out,
            sweep_eps2,
            resolution,
        } => commands::render(&argv, &phi, &out, sweep_eps2.as_deref(), resolution),
        Command::Config { emit_default, check } => commands::config(emit_default, check.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("Run `graspforge --help` for usage.");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
