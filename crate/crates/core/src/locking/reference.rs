//! Slow, literal restatement of the locking contract, used to cross-check
//! the engine. It walks every cycle, keeps queues as plain vectors and
//! decides admissibility by scanning the admission history.

use super::{LockWindow, PipelineConfig, SimOutcome};
use crate::trace::ClockedHeader;

fn conflicts(gap: u64, config: &PipelineConfig) -> bool {
    let n = u64::from(config.depth);
    if n < 2 {
        return false;
    }
    match config.lock_window {
        LockWindow::Exclusive => gap < n,
        LockWindow::Inclusive => gap <= n,
    }
}

/// Same contract as [`super::run_locking_batch`]; intended for batches of
/// at most a few thousand headers.
pub fn reference_oracle(headers: &[ClockedHeader], config: &PipelineConfig) -> SimOutcome {
    let q = config.queues as usize;
    let mut queues: Vec<Vec<&ClockedHeader>> = vec![Vec::new(); q];
    // (admission cycle, w), oldest first
    let mut history: Vec<(u64, u16)> = Vec::new();
    let mut pointer = 0;
    let mut out = SimOutcome {
        received: headers.len() as u64,
        ..SimOutcome::default()
    };
    let last_arrival = headers.iter().map(|h| h.ready_cycle).max().unwrap_or(0);
    let mut t = 0u64;

    while t < last_arrival || queues.iter().any(|qu| !qu.is_empty()) {
        t += 1;

        let first = headers.partition_point(|h| h.ready_cycle < t);
        for h in headers[first..].iter().take_while(|h| h.ready_cycle == t) {
            let qu = &mut queues[h.queue_index as usize];
            if qu.len() < config.queue_len {
                qu.push(h);
            } else {
                out.dropped += 1;
            }
        }

        for k in 0..q {
            let qi = (pointer + k) % q;
            let Some(head) = queues[qi].first().copied() else {
                continue;
            };
            let blocked = history
                .iter()
                .rev()
                .take_while(|(at, _)| t - at <= u64::from(config.depth) + 1)
                .any(|&(at, w)| w == head.w && conflicts(t - at, config));
            if blocked {
                continue;
            }
            queues[qi].remove(0);
            history.push((t, head.w));
            out.served += 1;
            out.latency_samples.push(t - head.ready_cycle);
            pointer = (qi + 1) % q;
            break;
        }
    }
    out.cycles_elapsed = t;
    out
}
