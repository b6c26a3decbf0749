//! Locking engine against the slow reference, plus properties of the
//! schedule it produces.

use proptest::prelude::*;
use statelock::experiment::{run_experiment, Batch};
use statelock::locking::{
    reference_oracle, run_locking_batch, run_locking_batch_logged, EventKind, LockWindow,
    PipelineConfig,
};
use statelock::trace::synthetic::flow_record;
use statelock::trace::{
    generate_synthetic, ClockedHeader, FlowModel, HeaderBuilder, PacketRecord, SizeModel,
    SyntheticSpec,
};
use statelock::FlowKeyMode;

const SIZES: [u32; 6] = [64, 64, 90, 160, 600, 1500];

fn headers(
    records: &[PacketRecord],
    mode: FlowKeyMode,
    cfg: &PipelineConfig,
) -> Vec<ClockedHeader> {
    HeaderBuilder::new(mode, cfg.clocking(), cfg.dispatcher().unwrap()).build(records)
}

fn config_strategy() -> impl Strategy<Value = PipelineConfig> {
    (
        1u32..=30,
        prop::sample::select(vec![1u32, 2, 4, 8, 16]),
        prop::sample::select(vec![1usize, 2, 10, 100]),
        prop::sample::select(vec![1u8, 2, 4, 8]),
        0u64..3,
        any::<bool>(),
    )
        .prop_map(
            |(depth, queues, queue_len, w_bits, gap_cycles, inclusive)| PipelineConfig {
                depth,
                queues,
                queue_len,
                w_bits,
                gap_cycles,
                lock_window: if inclusive {
                    LockWindow::Inclusive
                } else {
                    LockWindow::Exclusive
                },
                ..Default::default()
            },
        )
}

fn trace_strategy() -> impl Strategy<Value = Vec<PacketRecord>> {
    prop::collection::vec((0..SIZES.len(), 0u32..12), 0..400).prop_map(|v| {
        v.into_iter()
            .map(|(s, f)| flow_record(f, SIZES[s]))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn engine_matches_reference(cfg in config_strategy(), records in trace_strategy()) {
        let h = headers(&records, FlowKeyMode::FiveTuple, &cfg);
        prop_assert_eq!(run_locking_batch(&h, &cfg), reference_oracle(&h, &cfg));
    }

    #[test]
    fn accounting_and_queue_fifo(cfg in config_strategy(), records in trace_strategy()) {
        let h = headers(&records, FlowKeyMode::FiveTuple, &cfg);
        let mut log = Vec::new();
        let out = run_locking_batch_logged(&h, &cfg, &mut log);
        prop_assert_eq!(out.received, h.len() as u64);
        prop_assert_eq!(out.served + out.dropped, out.received);
        prop_assert_eq!(out.latency_samples.len() as u64, out.served);

        // each queue admits exactly its accepted arrivals, in arrival order
        let q = cfg.queues as usize;
        let mut accepted: Vec<Vec<u16>> = vec![Vec::new(); q];
        let mut admitted: Vec<Vec<u16>> = vec![Vec::new(); q];
        let mut pending: Option<(u64, u32, u16)> = None;
        for e in &log {
            if let Some(p) = pending.take() {
                if !(e.kind == EventKind::Drop && (e.cycle, e.queue, e.w) == p) {
                    accepted[p.1 as usize].push(p.2);
                }
            }
            match e.kind {
                EventKind::Arrive => pending = Some((e.cycle, e.queue, e.w)),
                EventKind::Admit => admitted[e.queue as usize].push(e.w),
                _ => {}
            }
        }
        if let Some(p) = pending {
            accepted[p.1 as usize].push(p.2);
        }
        prop_assert_eq!(accepted, admitted);
    }

    #[test]
    fn admissions_respect_hold_window(cfg in config_strategy(), records in trace_strategy()) {
        let h = headers(&records, FlowKeyMode::Global, &cfg);
        let mut log = Vec::new();
        run_locking_batch_logged(&h, &cfg, &mut log);
        let hold = cfg.hold_cycles();
        let mut last = std::collections::HashMap::new();
        for e in log.iter().filter(|e| e.kind == EventKind::Admit) {
            if let Some(prev) = last.insert(e.w, e.cycle) {
                prop_assert!(e.cycle - prev >= hold.max(1));
            }
        }
    }
}

fn zipf_batch(seed: u64, flows: u32) -> Vec<Batch> {
    let spec = SyntheticSpec {
        num_packets: 20_000,
        size_model: SizeModel::Bimodal {
            p_small: 0.7,
            small_bytes: 64,
            large_bytes: 1500,
        },
        flow_model: FlowModel::Zipf {
            num_flows: flows,
            alpha: 1.1,
        },
        seed,
    };
    vec![Batch {
        index: 0,
        records: generate_synthetic(&spec).unwrap().collect(),
        partial: false,
    }]
}

/// Holds empirically on the reference grid; see the counterexample below
/// for why it is not a theorem.
#[test]
fn served_grows_with_queue_length() {
    for (seed, flows) in [(2u64, 16u32), (3, 200), (4, 1000)] {
        let batches = zipf_batch(seed, flows);
        for depth in [2, 5, 12, 30] {
            for queues in [1, 4] {
                let mut prev = 0;
                for queue_len in [1, 10, 100] {
                    let cfg = PipelineConfig {
                        depth,
                        queues,
                        queue_len,
                        ..Default::default()
                    };
                    let served = run_experiment(&batches, FlowKeyMode::FiveTuple, &cfg)
                        .unwrap()
                        .batches[0]
                        .served;
                    assert!(
                        served >= prev,
                        "seed {seed} N={depth} Q={queues} Q_len={queue_len}: {served} < {prev}"
                    );
                    prev = served;
                }
            }
        }
    }
}

#[test]
fn one_queue_per_flow_keeps_order_without_loss() {
    // 8 flows round robin, W = 8 bits so collisions are unlikely, deep queues
    let records: Vec<_> = (0..8000u32).map(|i| flow_record(i % 8, 64)).collect();
    let cfg = PipelineConfig {
        depth: 8,
        queues: 16,
        queue_len: 10_000,
        w_bits: 8,
        ..Default::default()
    };
    let h = headers(&records, FlowKeyMode::FiveTuple, &cfg);
    let out = run_locking_batch(&h, &cfg);
    assert_eq!(out.dropped, 0);
    assert_eq!(out.served, 8000);
}

/// With a single FIFO and a handful of heavy flows, tail drops can break up
/// same-flow runs at the queue head, so a longer queue may serve less.
#[test]
fn longer_queue_can_serve_less_under_head_of_line_blocking() {
    let batches = zipf_batch(1, 3);
    let served = |queue_len| {
        let cfg = PipelineConfig {
            depth: 30,
            queues: 1,
            queue_len,
            ..Default::default()
        };
        run_experiment(&batches, FlowKeyMode::FiveTuple, &cfg)
            .unwrap()
            .batches[0]
            .served
    };
    assert!(served(100) < served(50));
}
