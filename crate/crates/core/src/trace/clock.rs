use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::PacketRecord;
use crate::error::{Error, Result};
use crate::flow::{extract_key, Dispatcher, FlowKey, FlowKeyMode};

/// Reception model: the data path reads `chunk_bytes` per clock cycle and
/// packets follow each other with `gap_cycles` idle cycles in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clocking {
    pub chunk_bytes: u32,
    pub gap_cycles: u64,
}

impl Default for Clocking {
    fn default() -> Self {
        Clocking {
            chunk_bytes: 80,
            gap_cycles: 0,
        }
    }
}

impl Clocking {
    pub fn new(chunk_bytes: u32, gap_cycles: u64) -> Result<Self> {
        if chunk_bytes == 0 {
            return Err(Error::Config("chunk_bytes must be at least 1".into()));
        }
        Ok(Clocking {
            chunk_bytes,
            gap_cycles,
        })
    }

    pub fn reception_cycles(&self, wire_len: u32) -> u64 {
        u64::from(wire_len.div_ceil(self.chunk_bytes))
    }
}

/// Yields `(record_index, ready_cycle)`: the cycle at which each packet has
/// been completely received. The first packet starts at cycle 0.
pub fn assign_clocks<I>(records: I, clocking: Clocking) -> impl Iterator<Item = (usize, u64)>
where
    I: IntoIterator,
    I::Item: Borrow<PacketRecord>,
{
    let mut cycle = 0u64;
    records.into_iter().enumerate().map(move |(i, r)| {
        if i > 0 {
            cycle += clocking.gap_cycles;
        }
        cycle += clocking.reception_cycles(r.borrow().wire_len);
        (i, cycle)
    })
}

/// A received header, ready for the stateful block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockedHeader {
    pub record_index: usize,
    pub ready_cycle: u64,
    pub flow_key: FlowKey,
    pub queue_index: u32,
    pub w: u16,
}

/// Clocks, keys and dispatches a batch of records in one pass.
#[derive(Debug, Clone)]
pub struct HeaderBuilder {
    pub key_mode: FlowKeyMode,
    pub clocking: Clocking,
    pub dispatcher: Dispatcher,
}

impl HeaderBuilder {
    pub fn new(key_mode: FlowKeyMode, clocking: Clocking, dispatcher: Dispatcher) -> Self {
        HeaderBuilder {
            key_mode,
            clocking,
            dispatcher,
        }
    }

    pub fn build(&self, records: &[PacketRecord]) -> Vec<ClockedHeader> {
        assign_clocks(records, self.clocking)
            .map(|(i, ready_cycle)| {
                let flow_key = extract_key(&records[i], self.key_mode);
                let (queue_index, w) = self.dispatcher.dispatch(&flow_key);
                ClockedHeader {
                    record_index: i,
                    ready_cycle,
                    flow_key,
                    queue_index,
                    w,
                }
            })
            .collect()
    }
}
