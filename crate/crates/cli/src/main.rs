use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod config;
mod run;

use config::{load_overlay, Overlay};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "mpisentinel", version, about = "Static MPI error detection over LLVM IR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a benchmark directory and obtain IR for every source.
    Ingest(IngestArgs),
    /// Run an Intra, Mix or Cross scenario and write a report.
    Evaluate(EvaluateArgs),
    /// Exclude one or two error labels from training and measure detection.
    Ablate(AblateArgs),
    /// Train one model on every evaluable sample of a manifest.
    Train(TrainArgs),
    /// Classify a single IR file with a trained model.
    Predict(PredictArgs),
    /// Print or cache the embedding of IR files.
    Embed(EmbedArgs),
    /// Print the program graph of an IR file as JSON.
    Graph(GraphArgs),
}

/// Options shared by the commands that train models. Every field is
/// optional so flags, the config file and defaults can be layered.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOpts {
    /// ir2vec-dt or gnn
    #[arg(long)]
    pub backend: Option<String>,
    /// binary or error-type
    #[arg(long)]
    pub labels: Option<String>,
    /// none, vector or index
    #[arg(long)]
    pub normalization: Option<String>,
    /// on or off
    #[arg(long)]
    pub ga: Option<String>,
    #[arg(long)]
    pub ga_population: Option<usize>,
    #[arg(long)]
    pub ga_generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict to one optimization level (O0, O2, Os).
    #[arg(long)]
    pub opt: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed of the embedding vocabulary.
    #[arg(long)]
    pub embed_seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOpts {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// intra, mix or cross
    #[arg(long)]
    pub scenario: Option<String>,
    /// Suite of an intra scenario.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub train_suite: Option<String>,
    #[arg(long)]
    pub validate_suite: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// standard or paper-literal
    #[arg(long)]
    pub specificity_formula: Option<String>,
    #[arg(long, env = "MPISENTINEL_JOBS")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub opts: EvaluateOpts,
    /// JSON config file (or a previous report, to replay it).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write a per-fold CSV next to the report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub opts: EvaluateOpts,
    /// Label to remove from every training fold; give once or twice.
    #[arg(long = "exclude")]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOpts {
    /// mbi or corrbench
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Optimization levels; repeat for several.
    #[arg(long = "opt")]
    pub opt: Option<Vec<String>>,
    /// Template with {source}, {output} and {opt}; `none` uses prebuilt IR.
    #[arg(long, env = "MPISENTINEL_COMPILER_CMD")]
    pub compiler_cmd: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Where compiled IR goes; defaults to `ir/` next to the manifest.
    #[arg(long)]
    pub ir_dir: Option<PathBuf>,
    #[arg(long)]
    pub header_pattern: Option<String>,
    /// JSON object mapping MBI header descriptors to labels.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    #[arg(long, env = "MPISENTINEL_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub opts: IngestOpts,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Merge into an existing manifest, replacing samples of this suite.
    #[arg(long)]
    pub append: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Train only on this suite; all suites by default.
    #[arg(long)]
    pub suite: Option<String>,
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "MPISENTINEL_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ir: PathBuf,
}

#[derive(Args)]
pub struct EmbedArgs {
    /// IR files to embed.
    #[arg(long = "ir", required = true)]
    pub ir: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write a CSV cache (plus `.meta.json`) instead of printing JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub ir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub exit: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 2, kind, message: message.into() }
    }

    pub fn internal(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 3, kind, message: message.into() }
    }
}

pub fn emit(level: &str, kind: &str, message: &str) {
    let line = serde_json::json!({ "level": level, "kind": kind, "message": message });
    eprintln!("{line}");
}

pub fn read_overlay(path: Option<&Path>) -> Result<Overlay, CliError> {
    path.map(load_overlay).transpose().map(Option::unwrap_or_default)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit("error", "usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => run::ingest(a),
        Command::Evaluate(a) => run::evaluate(a),
        Command::Ablate(a) => run::ablate(a),
        Command::Train(a) => run::train(a),
        Command::Predict(a) => run::predict(a),
        Command::Embed(a) => run::embed(a),
        Command::Graph(a) => run::graph(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            emit("error", e.kind, &e.message);
            ExitCode::from(e.exit)
        }
    }
}
