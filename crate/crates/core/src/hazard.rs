//! Data hazards in an unlocked stateful pipeline.
//!
//! Every header enters the `N`-cycle stateful block in the cycle it is
//! completely received. A header is hazardous when another header with the
//! same flow key entered at most `N` cycles earlier, with `N >= 2`: a
//! 1500-byte packet stream (19-cycle spacing) is then hazard-free exactly up
//! to `N = 18`, and a single-cycle block never conflicts.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::{percentile, Batch};
use crate::flow::{Dispatcher, FlowKey, FlowKeyMode, HashParams};
use crate::trace::{ClockedHeader, Clocking, HeaderBuilder, PacketRecord};

/// Whether two same-key entries `gap` cycles apart conflict in a block of
/// depth `depth`.
pub fn hazard_predicate(gap: u64, depth: u32) -> bool {
    depth >= 2 && gap <= u64::from(depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HazardConfig {
    pub depth: u32,
    pub key_mode: FlowKeyMode,
    pub clocking: Clocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HazardResult {
    pub hazards: u64,
    pub total_cycles: u64,
}

impl HazardResult {
    /// Fraction of data hazards: hazard events over cycles needed to receive
    /// the batch.
    pub fn fdh(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.hazards as f64 / self.total_cycles as f64
        }
    }
}

/// Counts at most one hazard per entering header. Only the most recent
/// same-key entry can have the smallest gap, so a last-entry map suffices.
pub fn run_hazard_batch(headers: &[ClockedHeader], depth: u32) -> HazardResult {
    let mut last_entry: HashMap<FlowKey, u64> = HashMap::with_capacity(headers.len().min(1 << 16));
    let mut hazards = 0;
    for h in headers {
        if let Some(prev) = last_entry.insert(h.flow_key, h.ready_cycle) {
            if hazard_predicate(h.ready_cycle - prev, depth) {
                hazards += 1;
            }
        }
    }
    HazardResult {
        hazards,
        total_cycles: headers.last().map_or(0, |h| h.ready_cycle),
    }
}

/// Keys and clocks `records` per `config`, then counts hazards.
pub fn run_hazard_records(records: &[PacketRecord], config: &HazardConfig) -> HazardResult {
    run_hazard_batch(
        &hazard_headers(records, config.key_mode, config.clocking),
        config.depth,
    )
}

fn hazard_headers(
    records: &[PacketRecord],
    key_mode: FlowKeyMode,
    clocking: Clocking,
) -> Vec<ClockedHeader> {
    // queue index and w play no part here
    let dispatcher = Dispatcher::new(1, 16, HashParams::default()).expect("static parameters");
    HeaderBuilder::new(key_mode, clocking, dispatcher).build(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdhPoint {
    pub depth: u32,
    pub fdh_p99: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdhCurve {
    pub key_mode: FlowKeyMode,
    pub points: Vec<FdhPoint>,
    pub batches: usize,
    /// The trace was shorter than one batch.
    pub partial: bool,
}

/// 99th-percentile FDH across sampled batches, for each depth in `depths`.
pub fn fdh_curve(
    batches: &[Batch],
    key_mode: FlowKeyMode,
    depths: &[u32],
    clocking: Clocking,
) -> Result<FdhCurve> {
    if depths.is_empty() {
        return Err(Error::Config("depth range is empty".into()));
    }
    if let Some(&bad) = depths.iter().find(|&&d| d == 0) {
        return Err(Error::Config(format!(
            "pipeline depth must be at least 1, got {bad}"
        )));
    }
    // samples[depth_idx][batch_idx]
    let per_batch: Vec<Vec<f64>> = batches
        .iter()
        .map(|b| {
            let headers = hazard_headers(&b.records, key_mode, clocking);
            depths
                .par_iter()
                .map(|&d| run_hazard_batch(&headers, d).fdh())
                .collect()
        })
        .collect();
    let points = depths
        .iter()
        .enumerate()
        .map(|(i, &depth)| {
            let samples: Vec<f64> = per_batch.iter().map(|s| s[i]).collect();
            Ok(FdhPoint {
                depth,
                fdh_p99: percentile(&samples, 99.0)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FdhCurve {
        key_mode,
        points,
        batches: batches.len(),
        partial: batches.iter().any(|b| b.partial),
    })
}
