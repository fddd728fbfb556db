//! Command-line front end for the `har-core` pipeline.
//!
//! Each subcommand is one pipeline stage reading and writing plain files:
//! `synth` generates recordings, `extract` turns them into a feature matrix,
//! `rank` and `pca` explore that matrix, `evaluate` cross-validates the
//! classifiers and `report` re-prints the summary grid of an earlier run.

pub mod bundle;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "har", version, about = "Human activity recognition from smartphone inertial sensors")]
pub struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic gait dataset.
    Synth(SynthArgs),
    /// Segment recordings and write the feature matrix.
    Extract(ExtractArgs),
    /// Rank features by random-forest importance.
    Rank(RankArgs),
    /// Cross-validate the classifiers and write the report bundle.
    Evaluate(EvaluateArgs),
    /// Project the top-ranked features onto their principal components.
    Pca(PcaArgs),
    /// Print the summary grid of an earlier evaluation.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the recordings.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub days: Option<u8>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset directory containing a session manifest.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Session manifest (path,user_id,day,activity).
    #[arg(long, value_name = "FILE")]
    pub sessions: Option<PathBuf>,
    /// A single recording; needs --user, --day and --activity.
    #[arg(long, value_name = "FILE", requires_all = ["user", "day", "activity"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub day: Option<u8>,
    #[arg(long)]
    pub activity: Option<String>,
    /// Custom feature manifest.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Feature matrix CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Ranking CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Label merge scenario used as the ranking target.
    #[arg(long, default_value = "none")]
    pub scenario: String,
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Number of features printed.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Report bundle directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of gbt, svm, mlp.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Comma-separated scenarios: none, bag_normal, fast_bag_normal.
    #[arg(long = "scenario", value_delimiter = ',')]
    pub scenarios: Option<Vec<String>>,
    /// Comma-separated feature sets such as top195 or all.
    #[arg(long, value_delimiter = ',')]
    pub feature_sets: Option<Vec<String>>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Keep every user's rows inside one fold.
    #[arg(long)]
    pub group_by_user: bool,
    #[arg(long)]
    pub n_trees: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Projection CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    pub scenario: String,
    /// Number of top-ranked features projected.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub components: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report bundle directory written by `evaluate`.
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

/// Parse `args` (program name first), run the command and return the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &f;
            eprintln!("error: {e:#}");
            f.code()
        }
    }
}

/// Run a parsed command line.
pub fn execute(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(Failure::Usage)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("--threads must be positive")));
        }
        // Ignored when the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Synth(a) => commands::synth(cfg, a),
        Command::Extract(a) => commands::extract(cfg, a),
        Command::Rank(a) => commands::rank(cfg, a),
        Command::Evaluate(a) => commands::evaluate(cfg, a),
        Command::Pca(a) => commands::pca(cfg, a),
        Command::Report(a) => commands::report(cfg, a),
    }
}
