use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Batch;
use crate::error::Result;
use crate::flow::FlowKeyMode;
use crate::hazard::run_hazard_batch;
use crate::locking::{run_locking_batch, PipelineConfig, SimOutcome};
use crate::trace::{ClockedHeader, HeaderBuilder};

/// How per-batch throughputs combine into one figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputAggregation {
    /// The worst batch.
    #[default]
    Min,
    /// Total served over total received across all batches.
    Pooled,
}

impl std::str::FromStr for ThroughputAggregation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(ThroughputAggregation::Min),
            "pooled" => Ok(ThroughputAggregation::Pooled),
            other => Err(crate::error::Error::Config(format!(
                "unknown aggregation `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchMetrics {
    pub batch_index: u64,
    /// Hazard fraction of the same batch without locking.
    pub fdh: f64,
    pub throughput: f64,
    pub latency_p99_cycles: u64,
    pub latency_p99_ns: f64,
    pub received: u64,
    pub served: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub key_mode: FlowKeyMode,
    pub config: PipelineConfig,
    pub batches: Vec<BatchMetrics>,
    pub min_throughput: f64,
    pub pooled_throughput: f64,
    /// Maximum over batches of the per-batch 99th-percentile latency.
    pub latency_p99_cycles: u64,
    pub latency_p99_ns: f64,
    pub partial: bool,
}

impl ExperimentSummary {
    pub fn throughput(&self, aggregation: ThroughputAggregation) -> f64 {
        match aggregation {
            ThroughputAggregation::Min => self.min_throughput,
            ThroughputAggregation::Pooled => self.pooled_throughput,
        }
    }
}

/// Batches already clocked and dispatched for one `(key mode, Q, W,
/// clocking, hash)` combination; `N` and `Q_len` can vary freely on top.
#[derive(Debug, Clone)]
pub struct PreparedBatches {
    pub key_mode: FlowKeyMode,
    pub queues: u32,
    pub w_bits: u8,
    indices: Vec<u64>,
    headers: Vec<Vec<ClockedHeader>>,
    partial: bool,
}

impl PreparedBatches {
    pub fn new(batches: &[Batch], key_mode: FlowKeyMode, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let builder = HeaderBuilder::new(key_mode, config.clocking(), config.dispatcher()?);
        Ok(PreparedBatches {
            key_mode,
            queues: config.queues,
            w_bits: config.w_bits,
            indices: batches.iter().map(|b| b.index).collect(),
            headers: batches
                .par_iter()
                .map(|b| builder.build(&b.records))
                .collect(),
            partial: batches.iter().any(|b| b.partial),
        })
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    pub fn headers(&self, i: usize) -> &[ClockedHeader] {
        &self.headers[i]
    }

    pub fn batch_index(&self, i: usize) -> u64 {
        self.indices[i]
    }
}

fn batch_metrics(
    batch_index: u64,
    headers: &[ClockedHeader],
    outcome: &SimOutcome,
    config: &PipelineConfig,
) -> BatchMetrics {
    let latency = outcome.latency_percentile(99.0);
    BatchMetrics {
        batch_index,
        fdh: run_hazard_batch(headers, config.depth).fdh(),
        throughput: outcome.throughput(),
        latency_p99_cycles: latency,
        latency_p99_ns: config.cycles_to_ns(latency as f64),
        received: outcome.received,
        served: outcome.served,
        dropped: outcome.dropped,
    }
}

/// Runs the locking engine on every prepared batch under `config` (whose
/// `Q` and `W` must match the preparation).
pub fn run_prepared(
    prepared: &PreparedBatches,
    config: &PipelineConfig,
) -> Result<ExperimentSummary> {
    config.validate()?;
    if config.queues != prepared.queues || config.w_bits != prepared.w_bits {
        return Err(crate::error::Error::Config(
            "pipeline Q/W differ from the ones the batches were dispatched with".into(),
        ));
    }
    let batches: Vec<BatchMetrics> = (0..prepared.len())
        .into_par_iter()
        .map(|i| {
            let headers = prepared.headers(i);
            let outcome = run_locking_batch(headers, config);
            batch_metrics(prepared.batch_index(i), headers, &outcome, config)
        })
        .collect();

    let min_throughput = batches.iter().map(|b| b.throughput).fold(1.0, f64::min);
    let received: u64 = batches.iter().map(|b| b.received).sum();
    let served: u64 = batches.iter().map(|b| b.served).sum();
    let pooled_throughput = if received == 0 {
        1.0
    } else {
        served as f64 / received as f64
    };
    let latency_p99_cycles = batches
        .iter()
        .map(|b| b.latency_p99_cycles)
        .max()
        .unwrap_or(0);
    Ok(ExperimentSummary {
        key_mode: prepared.key_mode,
        config: *config,
        batches,
        min_throughput,
        pooled_throughput,
        latency_p99_cycles,
        latency_p99_ns: config.cycles_to_ns(latency_p99_cycles as f64),
        partial: prepared.partial,
    })
}

/// Per-batch throughput and tail latency of the locking pipeline.
pub fn run_experiment(
    batches: &[Batch],
    key_mode: FlowKeyMode,
    config: &PipelineConfig,
) -> Result<ExperimentSummary> {
    run_prepared(&PreparedBatches::new(batches, key_mode, config)?, config)
}
