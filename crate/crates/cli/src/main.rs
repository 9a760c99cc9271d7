//! `classcp`: ingest engagement/link/label files into a sparse tensor, fit
//! the joint factorization, evaluate classifiers, and generate synthetic
//! planted datasets.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvaluateInputs, SynthArgs};
use config::ConfigPatch;

const ENV_HELP: &str = "Environment overrides (prefix CLASSCP_, applied between flags and the config file):\n  CLASSCP_RANK, CLASSCP_LAMBDA_G, CLASSCP_TOL, CLASSCP_MAX_ITERS, CLASSCP_RESTARTS,\n  CLASSCP_RIDGE, CLASSCP_SEED, CLASSCP_JOBS, CLASSCP_MIN_DEGREE,\n  CLASSCP_TRAIN_FRACTION, CLASSCP_REPEATS\n\nPrecedence: defaults < flags < environment < --config file.";

#[derive(Parser)]
#[command(name = "classcp", version, about = "Semi-supervised tensor factorization pipeline", after_help = ENV_HELP)]
struct Cli {
    /// JSON config file; its keys override flags and environment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Factorization rank r.
    #[arg(long, global = true)]
    rank: Option<usize>,

    /// Label-regression weight.
    #[arg(long, global = true)]
    lambda_g: Option<f64>,

    /// Relative-change stopping tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Maximum alternating sweeps per restart.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Random restarts; the best final objective wins.
    #[arg(long, global = true)]
    restarts: Option<usize>,

    /// Diagonal regularizer added to each block system.
    #[arg(long, global = true)]
    ridge: Option<f64>,

    /// Root seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for restarts and repeats.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Iterated minimum-degree filter threshold [default: 3].
    #[arg(long, global = true)]
    min_degree: Option<usize>,

    /// Labeled fraction per class for splits [default: 0.8].
    #[arg(long, global = true)]
    train_fraction: Option<f64>,

    /// Experiment repetitions [default: 10].
    #[arg(long, global = true)]
    repeats: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse raw TSV files, filter low-degree users, and write the tensor.
    Ingest {
        /// Post-user engagement file: `post_id<TAB>user_id` per line.
        #[arg(long)]
        engagements: PathBuf,
        /// Follower edges: `follower_id<TAB>followee_id` per line.
        #[arg(long)]
        links: PathBuf,
        /// Labels: `post_id<TAB>real|fake` per line.
        #[arg(long)]
        labels: PathBuf,
        /// Directory for the tensor, id map, and label artifacts.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit the factorization on an ingested tensor.
    Fit {
        /// Tensor artifact from `ingest`.
        #[arg(long)]
        tensor: PathBuf,
        /// Indexed label artifact from `ingest`; omit for a plain fit.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory for factor matrices and the fit report.
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated ranks; writes one report per rank, no factors.
        #[arg(long, value_delimiter = ',')]
        rank_sweep: Option<Vec<usize>>,
    },
    /// Run the repeated train/test experiment and write metric tables.
    Evaluate {
        /// Tensor artifact; `--labels` is then the indexed artifact.
        #[arg(long, conflicts_with_all = ["engagements", "links"])]
        tensor: Option<PathBuf>,
        /// Raw engagement file; `--labels` is then the raw id-based file.
        #[arg(long, requires = "links")]
        engagements: Option<PathBuf>,
        /// Raw follower-edge file, paired with `--engagements`.
        #[arg(long, requires = "engagements")]
        links: Option<PathBuf>,
        /// Label file matching the chosen input mode.
        #[arg(long)]
        labels: PathBuf,
        /// Directory for metric tables and reports.
        #[arg(long)]
        out_dir: PathBuf,
        /// Sweep labeled fractions 0.1..0.8 instead of a single setting.
        #[arg(long)]
        learning_curve: bool,
    },
    /// Generate a planted community dataset in raw ingestion format.
    Synth {
        /// Post count.
        #[arg(long)]
        posts: Option<usize>,
        /// User count.
        #[arg(long)]
        users: Option<usize>,
        /// Planted community count.
        #[arg(long)]
        communities: Option<usize>,
        /// Label class count; file emission needs exactly 2.
        #[arg(long)]
        classes: Option<usize>,
        /// Entry flip probability; must be 0 to keep files round-trippable.
        #[arg(long)]
        noise: Option<f64>,
        /// Directory for the generated raw files.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

impl Cli {
    fn patch(&self) -> ConfigPatch {
        ConfigPatch {
            rank: self.rank,
            lambda_g: self.lambda_g,
            tol: self.tol,
            max_iters: self.max_iters,
            restarts: self.restarts,
            ridge: self.ridge,
            seed: self.seed,
            jobs: self.jobs,
            min_degree: self.min_degree,
            train_fraction: self.train_fraction,
            repeats: self.repeats,
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = config::resolve(
        &cli.patch(),
        &|name| std::env::var(name).ok(),
        cli.config.as_deref(),
    )?;
    match &cli.cmd {
        Cmd::Ingest {
            engagements,
            links,
            labels,
            out_dir,
        } => commands::cmd_ingest(&cfg, engagements, links, labels, out_dir),
        Cmd::Fit {
            tensor,
            labels,
            out_dir,
            rank_sweep,
        } => commands::cmd_fit(
            &cfg,
            tensor,
            labels.as_deref(),
            out_dir,
            rank_sweep.as_deref(),
        ),
        Cmd::Evaluate {
            tensor,
            engagements,
            links,
            labels,
            out_dir,
            learning_curve,
        } => commands::cmd_evaluate(
            &cfg,
            &EvaluateInputs {
                tensor: tensor.as_deref(),
                engagements: engagements.as_deref(),
                links: links.as_deref(),
                labels,
            },
            out_dir,
            *learning_curve,
        ),
        Cmd::Synth {
            posts,
            users,
            communities,
            classes,
            noise,
            out_dir,
        } => commands::cmd_synth(
            &cfg,
            &SynthArgs {
                posts: *posts,
                users: *users,
                communities: *communities,
                classes: *classes,
                noise: *noise,
                out_dir: out_dir.clone(),
            },
        ),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
