use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use disjoint_core::arrangements::DEFAULT_ENUMERATION_BUDGET;
use disjoint_core::phase_sums::DIRICHLET_BUDGET;

use crate::config::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "labctl", version, about = "Sieves, exponential sums, block counts and arrangement experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sieve the Möbius function and write a cache file.
    Sieve(SieveArgs),
    /// Check a cache file's header and checksum, optionally against a fresh sieve.
    Verify(VerifyArgs),
    /// Weighted exponential averages at checkpoints.
    Sum(SumArgs),
    /// Block counts and entropy estimates of a symbol sequence.
    Entropy(EntropyArgs),
    /// Count the pieces cut out by a hyperplane arrangement.
    Pieces(PiecesArgs),
    /// Simultaneous approximation certificate.
    Dirichlet(DirichletArgs),
    /// Correlation statistics.
    #[command(subcommand)]
    Correlate(CorrelateCommand),
    /// Run a named experiment preset and write a report bundle.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SieveArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write n, mu, liouville, phi as CSV.
    #[arg(long)]
    pub aux_csv: Option<PathBuf>,
    /// Byte budget for the packed table.
    #[arg(long)]
    pub memory_budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Sieve again and compare byte for byte.
    #[arg(long)]
    pub recompute: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SumArgs {
    /// `mu`, `liouville`, `one`, or a cache file path.
    #[arg(long)]
    pub weights: String,
    /// Phase description, e.g. `poly:0,sqrt2`, `bracket:sqrt3,sqrt2`, `pow:3/2`, `concat:@file.json`.
    #[arg(long)]
    pub phase: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Number of logarithmically spaced checkpoints.
    #[arg(long, default_value_t = 20)]
    pub checkpoints: usize,
    #[arg(long, requires = "mask_residue", value_parser = clap::value_parser!(u64).range(1..))]
    pub mask_modulus: Option<u64>,
    #[arg(long, requires = "mask_modulus")]
    pub mask_residue: Option<u64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SequenceSource {
    /// `1_S(n)` for `{p1(n)} < {p2(n)}`.
    Indicator,
    /// Carry-pattern labels, four symbols.
    Example33,
    /// Uniform pseudorandom symbols.
    Random,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["seq", "source"])))]
pub struct EntropyArgs {
    /// Sequence file (`.bin` data with a `.json` header; either path works).
    #[arg(long)]
    pub seq: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub source: Option<SequenceSource>,
    /// Prefix length for generated sequences.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub p: u64,
    #[arg(long, default_value = "poly:0,sqrt2")]
    pub p1: String,
    #[arg(long, default_value = "poly:0,sqrt3")]
    pub p2: String,
    #[arg(long, default_value_t = 2)]
    pub alphabet: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jmax: u64,
    #[arg(long, default_value_t = 2)]
    pub threshold: u64,
    /// Positions before this index do not count toward effective blocks.
    #[arg(long, default_value_t = 0)]
    pub tail_start: usize,
    /// Write the generated sequence here.
    #[arg(long)]
    pub save_seq: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArrangementFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct PiecesArgs {
    #[arg(long)]
    pub arrangement: PathBuf,
    /// Defaults to the file extension.
    #[arg(long, value_enum)]
    pub format: Option<ArrangementFormat>,
    /// Include a witness point for every piece.
    #[arg(long)]
    pub witnesses: bool,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DirichletArgs {
    /// Comma-separated angles, e.g. `sqrt2,1/3`.
    #[arg(long)]
    pub theta: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub q: u64,
    #[arg(long, default_value_t = DIRICHLET_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorrelateCommand {
    /// Mean square of weighted sums along progressions `n + l s`, `l <= h`.
    Ap(ApArgs),
    /// Short-interval sup over a coefficient grid.
    Short(ShortArgs),
    /// `(1/N) Σ |z(n+shift) - z(n)|²` for `z(n) = w(n) e(f(n))`.
    Shift(ShiftArgs),
    /// Interpolating concatenation of `c n^{p/q}`: residual, and averages when weights are given.
    Concat(ConcatArgs),
}

#[derive(Debug, Args)]
pub struct ApArgs {
    #[arg(long, default_value = "mu")]
    pub weights: String,
    #[arg(long, default_value = "poly:0")]
    pub phase: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub s: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub h: Vec<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShortArgs {
    #[arg(long, default_value = "mu")]
    pub weights: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub x: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub h: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub density: u32,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(long, default_value = "mu")]
    pub weights: String,
    #[arg(long)]
    pub phase: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub shift: Vec<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    /// Doubling block lengths driven by the decay parameters.
    Decay,
    Geometric,
}

#[derive(Debug, Args)]
pub struct ConcatArgs {
    /// Exponent `p/q` of `c n^{p/q}`.
    #[arg(long, default_value = "3/2")]
    pub power: String,
    #[arg(long, default_value = "1")]
    pub coefficient: String,
    /// Pieces have degree `< k`.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Decay)]
    pub schedule: ScheduleKind,
    #[arg(long, default_value_t = 0.7)]
    pub tau: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 1)]
    pub first_gap: u64,
    #[arg(long, default_value_t = 1.5)]
    pub ratio: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n_end: u64,
    /// Residual is measured at every `stride`-th point.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    /// When given, also average `w(n) e(f(n))` and `w(n) e(g(n))` over `n < n_end`.
    #[arg(long)]
    pub weights: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Preset id; may also come from the config file.
    pub preset: Option<String>,
    /// List presets and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundle directory (default `labctl-out/<preset>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Möbius cache to use instead of sieving.
    #[arg(long)]
    pub weights_cache: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Command-line values for [`crate::config::Params`]; they win over the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub jmax: Option<usize>,
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub threshold: Option<u64>,
    #[arg(long)]
    pub density: Option<u32>,
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long)]
    pub s: Option<u64>,
    #[arg(long)]
    pub x: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub h: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub decades: Option<Vec<u32>>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub accuracy: Option<f64>,
}

impl Overrides {
    pub fn to_params(&self) -> crate::config::Params {
        crate::config::Params {
            n: self.n,
            j_max: self.jmax,
            l_max: self.lmax,
            k: self.k,
            m: self.m,
            trials: self.trials,
            threshold: self.threshold,
            density: self.density,
            q: self.q,
            s: self.s,
            x: self.x,
            h: self.h.clone(),
            decades: self.decades.clone(),
            tau: self.tau,
            c: self.c,
            accuracy: self.accuracy,
        }
    }
}
