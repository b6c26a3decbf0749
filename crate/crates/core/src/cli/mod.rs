//! The `statelock` command line tool.
//!
//! Every subcommand reads an [`ExperimentConfig`] (JSON file plus flag
//! overrides) and writes CSV files into the output directory, together with
//! a `run_info.json` describing what was read.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_budget, cmd_fdh, cmd_generate, cmd_run, cmd_stats, RunInfo};
pub use config::{ExperimentConfig, TraceSource};
pub use output::write_atomic;

use crate::error::Result;
use crate::experiment::ThroughputAggregation;
use crate::flow::FlowKeyMode;
use crate::locking::LockWindow;

#[derive(Debug, Parser)]
#[command(
    name = "statelock",
    version,
    about = "Data hazards and memory locking in stateful packet pipelines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Packet size CDF and distinct flows per window.
    Stats(CommonArgs),
    /// 99th-percentile fraction of data hazards for N = 1..n.
    Fdh(CommonArgs),
    /// Locking pipeline at depth n for every Q and Q_len.
    Run(CommonArgs),
    /// Largest depth sustaining each throughput target.
    Budget(CommonArgs),
    /// Write a synthetic trace as CSV; `--out` names the file.
    Generate(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Pcap,
    Csv,
    /// JSON synthetic trace spec.
    Synthetic,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace file: pcap, CSV, or a JSON synthetic spec.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<TraceFormat>,
    /// Label for the `trace` column; defaults to the file stem.
    #[arg(long)]
    pub trace_id: Option<String>,
    /// Key modes, comma separated: 5tuple, ipdst, ipdst16, global.
    #[arg(long, value_delimiter = ',')]
    pub key: Vec<FlowKeyMode>,
    /// Largest depth for fdh and budget; the depth simulated by run.
    #[arg(long)]
    pub n: Option<u32>,
    /// Queue counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<u32>,
    /// Queue capacities in headers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub qlen: Vec<usize>,
    /// Width of the scheduler key w, 1 to 16 bits.
    #[arg(long)]
    pub w_bits: Option<u8>,
    /// Bytes received per clock cycle.
    #[arg(long)]
    pub chunk_bytes: Option<u32>,
    /// Idle cycles between consecutive packets.
    #[arg(long)]
    pub gap_cycles: Option<u64>,
    /// Clock frequency used to convert cycles to ns.
    #[arg(long)]
    pub clock_ghz: Option<f64>,
    /// Consecutive packets per sampled batch.
    #[arg(long)]
    pub batch_size: Option<u64>,
    /// Packets between batch starts.
    #[arg(long)]
    pub batch_stride: Option<u64>,
    /// Throughput targets in (0, 1], comma separated.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,
    /// Seed for a synthetic trace.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (the CSV file for generate).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-batch event logs (run only).
    #[arg(long)]
    pub debug_events: bool,
    /// exclusive: a key blocks for N cycles; inclusive: N + 1.
    #[arg(long)]
    pub lock_window: Option<LockWindow>,
    /// min or pooled.
    #[arg(long)]
    pub aggregate: Option<ThroughputAggregation>,
    /// Packets per flow-count window (stats).
    #[arg(long)]
    pub window: Option<u64>,
    /// Header slot size in bytes for the silicon estimate.
    #[arg(long)]
    pub hlen_bytes: Option<u64>,
    /// Skip malformed CSV trace rows instead of failing.
    #[arg(long)]
    pub csv_lenient: bool,
}

pub fn run(cli: &Cli) -> Result<()> {
    let (Command::Stats(args)
    | Command::Fdh(args)
    | Command::Run(args)
    | Command::Budget(args)
    | Command::Generate(args)) = &cli.command;
    let cfg = ExperimentConfig::resolve(args)?;
    match cli.command {
        Command::Stats(_) => cmd_stats(&cfg),
        Command::Fdh(_) => cmd_fdh(&cfg),
        Command::Run(_) => cmd_run(&cfg),
        Command::Budget(_) => cmd_budget(&cfg),
        Command::Generate(_) => cmd_generate(&cfg),
    }
    .map(|_| ())
}
