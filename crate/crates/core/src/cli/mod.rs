// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `fluidrep` command line.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage, 3 missing input,
//! 4 format error.

mod commands;
pub mod records;
pub mod runner;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::obfuscation::{builtin_naming, ConceptClass, Naming, RelationalSlots, Template, TemplateKind};
pub use records::{AnswerRecord, PuzzleRecord, RepRow};
pub use runner::{run_manifest, Cell, ControlSpec, ExperimentManifest, PuzzleSource, RunSummary, Variant};

pub const OUT_ENV: &str = "FLUIDREP_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Format(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fluidrep",
    version,
    about = "BlocksWorld corpora, activation dumps, representations and steering runs"
)]
pub struct Cli {
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a puzzle corpus (JSON lines of {id, seed, puzzle}).
    Gen(GenArgs),
    /// Render one prompt per puzzle.
    Render(RenderArgs),
    /// Check every answer line and print one verdict per line.
    Verify(AnswerArgs),
    /// Accuracy per naming over a puzzle corpus.
    Score(AnswerArgs),
    /// Greedy toy-model rollouts, written as activation dumps plus answers.
    Rollout(RolloutArgs),
    /// Concept representations from dumps, as CSV.
    Extract(ExtractArgs),
    /// Similarity to reference representations along the traces.
    Curves(CurvesArgs),
    /// Principal components of representations from a CSV.
    Pca(PcaArgs),
    /// Run a steering manifest.
    Steer(RunArgs),
    /// Run a patching manifest (symbolic variants only).
    Patch(RunArgs),
    /// One-sample t-tests of accuracy changes per condition.
    Stats(StatsArgs),
    /// Print the built-in experiment presets as JSON.
    Presets,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = crate::presets::PUZZLE_BLOCKS)]
    pub blocks: usize,
    #[arg(long, default_value_t = crate::presets::PUZZLE_COUNT as u32)]
    pub count: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NamingArgs {
    /// Naming id: 0 is the plain domain vocabulary, 1-20 the built-in
    /// obfuscations.
    #[arg(long)]
    pub naming: Option<u32>,
    /// A naming JSON file; it replaces the built-in naming with its id.
    #[arg(long)]
    pub naming_file: Option<PathBuf>,
}

impl NamingArgs {
    fn custom(&self) -> Result<Option<Naming>, CliError> {
        match &self.naming_file {
            None => Ok(None),
            Some(p) => {
                if !p.exists() {
                    return Err(CliError::Missing(format!("{}: no such file", p.display())));
                }
                Naming::load(p).map(Some).map_err(|e| CliError::Format(e.to_string()))
            }
        }
    }

    /// The naming used when a record does not name one.
    fn default_id(&self) -> Result<Option<u32>, CliError> {
        Ok(self.naming.or(self.custom()?.map(|n| n.id())))
    }
}

/// Resolves naming ids, preferring a custom naming with the same id.
pub struct Namings {
    custom: Option<Naming>,
}

impl Namings {
    pub fn get(&self, id: u32) -> Result<Naming, CliError> {
        match &self.custom {
            Some(n) if n.id() == id => Ok(n.clone()),
            _ => builtin_naming(id).map_err(|e| CliError::Usage(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TemplateArgs {
    #[arg(long, default_value = "mystery", value_parser = parse_template_kind)]
    pub template: TemplateKind,
    /// Which words fill the held and on-top-of slots: table or swapped.
    #[arg(long, default_value = "table", value_parser = parse_relational)]
    pub relational: RelationalSlots,
}

impl TemplateArgs {
    pub fn template(&self) -> Template {
        Template {
            kind: self.template,
            relational: self.relational,
        }
    }
}

fn parse_template_kind(s: &str) -> Result<TemplateKind, String> {
    match s {
        "mystery" => Ok(TemplateKind::Mystery),
        "standard" => Ok(TemplateKind::Standard),
        _ => Err(format!("{s:?} is not one of mystery, standard")),
    }
}

fn parse_relational(s: &str) -> Result<RelationalSlots, String> {
    match s {
        "table" => Ok(RelationalSlots::Table),
        "swapped" => Ok(RelationalSlots::Swapped),
        _ => Err(format!("{s:?} is not one of table, swapped")),
    }
}

fn parse_class(s: &str) -> Result<ConceptClass, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub puzzles: PathBuf,
    #[command(flatten)]
    pub naming: NamingArgs,
    #[command(flatten)]
    pub template: TemplateArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    #[arg(long)]
    pub puzzles: PathBuf,
    /// JSON lines of {id, naming?, text}.
    #[arg(long)]
    pub answers: PathBuf,
    #[command(flatten)]
    pub naming: NamingArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub puzzles: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub namings: Vec<u32>,
    /// Only the first this-many puzzles.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub max_new: usize,
    /// Layers to keep in the dumps; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Toy model configuration as JSON; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub template: TemplateArgs,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpSelection {
    /// Root holding one naming-NN directory of dumps per naming.
    #[arg(long)]
    pub dumps: PathBuf,
    /// Namings to use; every naming under the root except the excluded
    /// ones when omitted.
    #[arg(long, value_delimiter = ',')]
    pub namings: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub exclude: Vec<u32>,
    /// At most this many dumps per naming, in directory order.
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub select: DumpSelection,
    /// Named defaults for window, timestamps, batch and layer: narrow
    /// (window 100) or wide (window 200).
    #[arg(long, default_value = "narrow")]
    pub preset: String,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub timestamp: Option<Vec<usize>>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Only rows of this kind: raw, centered or cross-naming.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub select: DumpSelection,
    #[arg(long)]
    pub layer: usize,
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    #[arg(long, default_value = "actions", value_parser = parse_class)]
    pub class: ConceptClass,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// Reference representations: cross-naming rows at `--layer` from a
    /// CSV written by `extract`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Timestamp of the reference. Without `--reference`, the reference is
    /// the cross-naming average of the selected dumps at this timestamp.
    #[arg(long)]
    pub reference_at: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    /// A representation CSV written by `extract`.
    #[arg(long)]
    pub reps: PathBuf,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub timestamp: Option<usize>,
    #[arg(long, value_parser = parse_class)]
    pub class: Option<ConceptClass>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; overrides the manifest's.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV of condition,naming,accuracy (or delta).
    #[arg(long)]
    pub input: PathBuf,
    /// Condition the others are compared with. Defaults to "baseline" for
    /// accuracy input; delta input needs none.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub exclude: Vec<u32>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Where a command writes: `out`, else `out_dir/default_name`, else stdout.
pub(crate) fn sink(out: Option<&Path>, out_dir: Option<&Path>, default_name: &str) -> Result<Box<dyn Write>, CliError> {
    let path = match (out, out_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.join(default_name),
        (None, None) => return Ok(Box::new(std::io::stdout().lock())),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| records::io_error(parent, e))?;
    }
    let file = std::fs::File::create(&path).map_err(|e| records::io_error(&path, e))?;
    Ok(Box::new(std::io::BufWriter::new(file)))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fluidrep: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let out_dir = cli.out_dir.as_deref();
    match &cli.command {
        Command::Gen(a) => commands::gen(a, out_dir),
        Command::Render(a) => commands::render(a, out_dir),
        Command::Verify(a) => commands::verify(a, out_dir),
        Command::Score(a) => commands::score(a, out_dir),
        Command::Rollout(a) => commands::rollout(a, out_dir),
        Command::Extract(a) => commands::extract(a, out_dir),
        Command::Curves(a) => commands::curves(a, out_dir),
        Command::Pca(a) => commands::pca(a, out_dir),
        Command::Steer(a) => commands::run(a, out_dir, false),
        Command::Patch(a) => commands::run(a, out_dir, true),
        Command::Stats(a) => commands::stats(a, out_dir),
        Command::Presets => commands::presets(),
    }
}
