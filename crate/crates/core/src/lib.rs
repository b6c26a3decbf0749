//! Cycle-accurate, trace-driven model of a stateful match-action pipeline
//! element.
//!
//! The crate covers two experiments over packet traces:
//!
//! * [`hazard`] counts data hazards when headers enter an `N`-cycle stateful
//!   pipeline as soon as they are received, with no locking at all.
//! * [`locking`] simulates a stall-based locking front end: headers are
//!   hashed into bounded FIFO queues and a cyclic-priority scheduler admits at
//!   most one header per cycle whose compressed key is not in flight.
//!
//! [`experiment`] wraps both with batch sampling, percentile statistics and
//! the clock-cycle budget search, and [`cli`] exposes everything as the
//! `statelock` command line tool.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod hazard;
pub mod locking;
pub mod trace;

pub use error::{Error, Result};
pub use flow::{FlowKey, FlowKeyMode, HashParams};
pub use trace::{ClockedHeader, PacketRecord};
