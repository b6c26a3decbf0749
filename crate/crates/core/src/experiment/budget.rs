use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{run_prepared, ExperimentSummary, PreparedBatches, ThroughputAggregation};
use super::Batch;
use crate::error::{Error, Result};
use crate::flow::FlowKeyMode;
use crate::locking::PipelineConfig;

/// Largest pipeline depth the budget search considers.
pub const MAX_BUDGET_DEPTH: u32 = 30;

/// One cell of a clock-cycle budget table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetEntry {
    pub trace: String,
    pub key_mode: FlowKeyMode,
    pub target: f64,
    pub queue_len: usize,
    pub queues: u32,
    pub budget_n: u32,
    /// Tail latency at `budget_n`; `None` when the budget is 1.
    pub latency_ns: Option<f64>,
}

/// `served / received >= target`, decided exactly on a parts-per-million
/// grid so that e.g. 99 900 of 100 000 meets 0.999.
pub fn meets_target(served: u64, received: u64, target: f64) -> bool {
    let target_ppm = (target * 1e6).round() as u128;
    u128::from(served) * 1_000_000 >= target_ppm * u128::from(received)
}

fn validate_target(target: f64) -> Result<()> {
    if target > 0.0 && target <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "throughput target {target} outside (0, 1]"
        )))
    }
}

/// Experiment results for every depth `1..=max_depth` at a fixed
/// `(key mode, Q, Q_len)`, ordered by depth.
#[derive(Debug, Clone)]
pub struct DepthScan {
    pub summaries: Vec<ExperimentSummary>,
}

impl DepthScan {
    pub fn sustains(
        summary: &ExperimentSummary,
        target: f64,
        aggregation: ThroughputAggregation,
    ) -> bool {
        match aggregation {
            ThroughputAggregation::Min => summary
                .batches
                .iter()
                .all(|b| meets_target(b.served, b.received, target)),
            ThroughputAggregation::Pooled => {
                let served = summary.batches.iter().map(|b| b.served).sum();
                let received = summary.batches.iter().map(|b| b.received).sum();
                meets_target(served, received, target)
            }
        }
    }

    /// Largest depth that sustains `target`. Every depth is checked: the
    /// throughput need not be monotone in `N`.
    pub fn budget(
        &self,
        trace: &str,
        target: f64,
        aggregation: ThroughputAggregation,
    ) -> Result<BudgetEntry> {
        validate_target(target)?;
        let best = self
            .summaries
            .iter()
            .filter(|s| Self::sustains(s, target, aggregation))
            .max_by_key(|s| s.config.depth)
            .or_else(|| self.summaries.first())
            .ok_or_else(|| Error::Config("empty depth scan".into()))?;
        let budget_n = best.config.depth;
        Ok(BudgetEntry {
            trace: trace.to_string(),
            key_mode: best.key_mode,
            target,
            queue_len: best.config.queue_len,
            queues: best.config.queues,
            budget_n,
            latency_ns: (budget_n > 1).then_some(best.latency_p99_ns),
        })
    }
}

/// Runs `base` at every depth `1..=max_depth`.
pub fn scan_depths(
    prepared: &PreparedBatches,
    base: &PipelineConfig,
    max_depth: u32,
) -> Result<DepthScan> {
    if !(1..=MAX_BUDGET_DEPTH).contains(&max_depth) {
        return Err(Error::Config(format!(
            "budget depth limit {max_depth} outside 1..={MAX_BUDGET_DEPTH}"
        )));
    }
    let summaries = (1..=max_depth)
        .into_par_iter()
        .map(|depth| run_prepared(prepared, &PipelineConfig { depth, ..*base }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthScan { summaries })
}

/// Clock-cycle budget for one trace, key mode and queue configuration
/// (`base.queues`, `base.queue_len`; `base.depth` is ignored).
pub fn budget_search(
    trace: &str,
    batches: &[Batch],
    key_mode: FlowKeyMode,
    base: &PipelineConfig,
    target: f64,
    aggregation: ThroughputAggregation,
) -> Result<BudgetEntry> {
    validate_target(target)?;
    let prepared = PreparedBatches::new(batches, key_mode, base)?;
    scan_depths(&prepared, base, MAX_BUDGET_DEPTH)?.budget(trace, target, aggregation)
}
