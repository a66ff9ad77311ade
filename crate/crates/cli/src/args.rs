use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "kcp",
    version,
    about = "Kronecker-CP weight tools: verification, complexity tables, timing, toy training"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the CSV report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel multiplication.
    #[arg(long, global = true, default_value_t = 4)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the randomized equivalence and invariant suites.
    Verify(VerifyArgs),
    /// Parameter counts and compression ratios of the registered LSTM weights.
    Tables(TablesArgs),
    /// Space and operation curves of TT, BT, TR, HT and KCP over a rank sweep.
    Curves(CurvesArgs),
    /// Serial vs parallel multiplication wall clock over a rank grid.
    Timing(TimingArgs),
    /// Train the toy KCP-LSTM classifier.
    TrainToy(TrainArgs),
    /// Write a random KCP weight in the binary weight format.
    InitWeight(InitWeightArgs),
    /// Describe a weight file.
    InspectWeight(InspectArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Corrupt one factor entry after the oracle is evaluated (negative control).
    #[arg(long)]
    pub poison: bool,
    /// Trials for the oracle suites.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

/// A weight shape and rank triple, e.g. `--shape-in 8,20,20,18 --shape-out 4,4,4,4 --ranks 4,4,2`.
#[derive(Debug, Args, Clone)]
pub struct ShapeArgs {
    #[arg(long, value_delimiter = ',')]
    pub shape_in: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub shape_out: Option<Vec<usize>>,
    /// `K,CA,CB`.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Gate count of the custom row.
    #[arg(long, default_value_t = 4)]
    pub gates: u64,
    /// Share the higher-mode factors of the custom row across gates.
    #[arg(long)]
    pub sharing: bool,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, default_value_t = 1)]
    pub r_min: u64,
    #[arg(long, default_value_t = 32)]
    pub r_max: u64,
    #[arg(long, default_value_t = 4)]
    pub d: u32,
    #[arg(long, default_value_t = 20)]
    pub m: u64,
    #[arg(long, default_value_t = 8)]
    pub n: u64,
    /// BT block count.
    #[arg(long, default_value_t = 2)]
    pub p: u64,
    /// KCP KT rank.
    #[arg(long, default_value_t = 4)]
    pub k: u64,
    /// Smallest rank from which KCP must be the cheapest format.
    #[arg(long, default_value_t = 16)]
    pub minimal_from: u64,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// Comma-separated CP ranks (`C = CA = CB`); default is a log-spaced grid over 2..100.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Timed runs per point; the best is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Restrict to one registered shape (`ucf11` or `ucf50`).
    #[arg(long)]
    pub shape: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub sequences: usize,
    #[arg(long, default_value_t = 5)]
    pub length: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
}

#[derive(Debug, Args)]
pub struct InitWeightArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}
