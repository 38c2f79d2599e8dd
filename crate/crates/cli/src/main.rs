//! `phvox`: every pipeline stage behind one subcommand-style binary.
//!
//! Exit codes: 0 success, 1 bad input (flags, files, config), 2 internal
//! failure.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::io::InputError;

/// Crate version plus the on-disk format versions.
pub const VERSION: &str = "0.1.0 (voxg 1, PHIX 1, VCPT 1)";

#[derive(Debug, Parser)]
#[command(name = "phvox", version = VERSION, about = "Pharmacophore-shape screening and voxel-to-SMILES generation")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for scoring and voxelization; 1 gives a fixed order.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonical SMILES, one per input line (stdin by default).
    Canon(StreamArgs),
    /// SMILES tokens, one line per input SMILES (stdin by default).
    Tokenize(TokenizeArgs),
    /// 3D conformers from SMILES, written as SDF.
    Embed(EmbedArgs),
    /// Pharmacophore-shape profiles of SDF records, as JSON.
    Perceive(IoArgs),
    /// One .voxg grid per SDF record.
    Voxelize(VoxelizeArgs),
    /// Tanimoto combo of candidate conformers against a query, as CSV.
    Score(ScoreArgs),
    /// Build or query a 2D fingerprint index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Train the captioning model; writes one checkpoint per epoch.
    Train(TrainArgs),
    /// Sample SMILES conditioned on a query conformer.
    Sample(SampleArgs),
    /// De-novo generation benchmark with an optional library baseline.
    Denovo(DenovoArgs),
    /// Generator-guided 2D analog search scored in 3D.
    Fastsearch(FastsearchArgs),
    /// Finite-difference check of the network gradient on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Input file; `-` or absent reads stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[command(flatten)]
    pub io: StreamArgs,
    /// Print vocabulary ids from this checkpoint instead of token strings.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub io: StreamArgs,
    /// Conformers per molecule.
    #[arg(long)]
    pub conformers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// SDF input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid preset: desk, full48 or full64.
    #[arg(long)]
    pub preset: Option<String>,
    /// Voxels per side.
    #[arg(long)]
    pub d: Option<usize>,
    /// Å per voxel.
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// SDF whose first record is the query.
    #[arg(long)]
    pub query: PathBuf,
    /// SDF of candidates; consecutive records with one title are conformers
    /// of one candidate.
    #[arg(long)]
    pub cands: PathBuf,
    /// CSV output; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Index a SMILES file; ids are 0-based line numbers.
    Build(IndexBuildArgs),
    /// Nearest analogs of SMILES in an index, as CSV.
    Query(IndexQueryArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    /// SMILES input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// PHIX output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also embed conformers and write them as an SDF conformer store.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Conformers per molecule in the store.
    #[arg(long)]
    pub conformers: Option<usize>,
    /// Fingerprint length in bits.
    #[arg(long)]
    pub nbits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IndexQueryArgs {
    /// PHIX index.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// One query SMILES; otherwise `--input` is read.
    #[arg(long)]
    pub smiles: Option<String>,
    /// SMILES file of queries.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Analogs per query.
    #[arg(long)]
    pub k: Option<usize>,
    /// CSV output; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training SMILES.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Validation SMILES.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Output directory for checkpoints and curves.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model preset: reference or tiny.
    #[arg(long)]
    pub preset: Option<String>,
    /// Passes over the training set.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Sequences per gradient step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Disable per-epoch random rigid motions.
    #[arg(long)]
    pub no_augment: bool,
    /// Stop once training accuracy reaches this fraction.
    #[arg(long)]
    pub stop_at_accuracy: Option<f64>,
    /// SDF of validation queries; picks the checkpoint with the most unique
    /// scaffold hits and copies it to best.vcpt.
    #[arg(long)]
    pub select_queries: Option<PathBuf>,
    /// Generated molecules per validation query during selection.
    #[arg(long)]
    pub select_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Sampling temperature, at least 1.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Keep only the k largest logits.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Token limit per sequence.
    #[arg(long)]
    pub max_length: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// VCPT checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// SDF whose first record conditions the sampler.
    #[arg(long)]
    pub query: PathBuf,
    /// Number of sequences.
    #[arg(long, short = 'n')]
    pub n: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output file; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenovoArgs {
    /// VCPT checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// SDF of query conformers.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Unique valid molecules scored per query.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Conformers embedded per generated molecule.
    #[arg(long)]
    pub conformers: Option<usize>,
    /// SMILES library for the random-sampling baseline.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Library molecules drawn per query for the baseline.
    #[arg(long)]
    pub baseline_sample: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FastsearchArgs {
    /// VCPT checkpoint; not needed with --brute-force.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// SDF of query conformers.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// PHIX index.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// SDF conformer store keyed by index id.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Unique generated molecules per query.
    #[arg(long)]
    pub n_g: Option<usize>,
    /// Analogs per generated molecule.
    #[arg(long)]
    pub n_a: Option<usize>,
    /// Score the whole index instead of generated analogs.
    #[arg(long)]
    pub brute_force: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Finite-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Parameters checked.
    #[arg(long)]
    pub subset: Option<usize>,
    /// JSON output; absent writes stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
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
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
