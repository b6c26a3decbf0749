//! Stall-based memory locking in front of an `N`-cycle stateful block.
//!
//! Headers are dispatched into `Q` bounded FIFO queues by `hash(FK) mod Q`.
//! Every cycle a work-conserving scheduler with cyclic priority admits at
//! most one head-of-line header whose compressed key `w` is not currently
//! held by the block. Arrivals to a full queue are tail-dropped. After the
//! last arrival the queues are drained.

mod engine;
mod reference;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use engine::{run_locking_batch, run_locking_batch_logged, InFlightSet};
pub use reference::reference_oracle;

use crate::error::{Error, Result};
use crate::experiment::percentile;
use crate::flow::{Dispatcher, HashParams};
use crate::trace::Clocking;

/// How long an admitted header keeps its `w` locked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockWindow {
    /// The key is held for the `N` cycles the header spends in the block; a
    /// same-key header may enter `N` cycles after its predecessor.
    #[default]
    Exclusive,
    /// The key is held for `N + 1` cycles, so admissions of one key are more
    /// than `N` cycles apart.
    Inclusive,
}

impl std::str::FromStr for LockWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclusive" => Ok(LockWindow::Exclusive),
            "inclusive" => Ok(LockWindow::Inclusive),
            other => Err(Error::Config(format!("unknown lock window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Pipeline depth `N` in cycles.
    pub depth: u32,
    /// Number of queues `Q`.
    pub queues: u32,
    /// Per-queue capacity `Q_len`, in headers.
    pub queue_len: usize,
    /// Width `W` of the compressed key, in bits.
    pub w_bits: u8,
    pub chunk_bytes: u32,
    pub gap_cycles: u64,
    pub clock_ghz: f64,
    pub lock_window: LockWindow,
    pub hash: HashParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            depth: 1,
            queues: 1,
            queue_len: 10,
            w_bits: 4,
            chunk_bytes: 80,
            gap_cycles: 0,
            clock_ghz: 1.0,
            lock_window: LockWindow::Exclusive,
            hash: HashParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.depth == 0 {
            return fail("N must be at least 1".into());
        }
        if self.queues == 0 {
            return fail("Q must be at least 1".into());
        }
        if self.queue_len == 0 {
            return fail("Q_len must be at least 1".into());
        }
        if !(1..=16).contains(&self.w_bits) {
            return fail(format!("W must be in 1..=16, got {}", self.w_bits));
        }
        if self.chunk_bytes == 0 {
            return fail("chunk_bytes must be at least 1".into());
        }
        if !(self.clock_ghz.is_finite() && self.clock_ghz > 0.0) {
            return fail(format!(
                "clock_ghz must be positive, got {}",
                self.clock_ghz
            ));
        }
        Ok(())
    }

    pub fn clocking(&self) -> Clocking {
        Clocking {
            chunk_bytes: self.chunk_bytes,
            gap_cycles: self.gap_cycles,
        }
    }

    pub fn dispatcher(&self) -> Result<Dispatcher> {
        Dispatcher::new(self.queues, self.w_bits, self.hash)
    }

    /// Cycles an admission keeps its `w` locked; 0 disables locking, which
    /// is the case for a single-cycle block.
    pub fn hold_cycles(&self) -> u64 {
        match (self.depth, self.lock_window) {
            (0 | 1, _) => 0,
            (n, LockWindow::Exclusive) => u64::from(n),
            (n, LockWindow::Inclusive) => u64::from(n) + 1,
        }
    }

    pub fn cycles_to_ns(&self, cycles: f64) -> f64 {
        cycles / self.clock_ghz
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimOutcome {
    pub received: u64,
    pub served: u64,
    pub dropped: u64,
    /// Cycles from reception to admission, one per served header, in
    /// admission order.
    pub latency_samples: Vec<u64>,
    pub cycles_elapsed: u64,
}

impl SimOutcome {
    /// Served over received; an empty batch counts as fully served.
    pub fn throughput(&self) -> f64 {
        if self.received == 0 {
            1.0
        } else {
            self.served as f64 / self.received as f64
        }
    }

    /// Nearest-rank latency percentile, 0 when nothing was served.
    pub fn latency_percentile(&self, p: f64) -> u64 {
        percentile(&self.latency_samples, p).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrive,
    Drop,
    Admit,
    Expire,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::Drop => "drop",
            EventKind::Admit => "admit",
            EventKind::Expire => "expire",
        }
    }
}

/// One line of the per-cycle debug log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub cycle: u64,
    pub kind: EventKind,
    pub queue: u32,
    pub w: u16,
}

pub fn write_events_csv<W: Write>(out: W, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "event", "queue", "w"])?;
    for e in events {
        w.write_record([
            e.cycle.to_string(),
            e.kind.as_str().to_string(),
            e.queue.to_string(),
            e.w.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events writer>", e))?;
    Ok(())
}
