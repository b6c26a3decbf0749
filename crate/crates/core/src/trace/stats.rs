use std::collections::{BTreeMap, HashSet};

use super::PacketRecord;
use crate::flow::{extract_key, FlowKey, FlowKeyMode};

/// Distinct flow keys per consecutive window of packets, for one key mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowWindowStats {
    pub key_mode: FlowKeyMode,
    /// Distinct keys in each complete window, in trace order.
    pub distinct_per_window: Vec<u64>,
    pub mean: f64,
    /// Set when the trace held no complete window and the counts describe
    /// the single partial one instead.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub packets: u64,
    pub window: u64,
    /// `(size, cumulative fraction of packets with wire_len <= size)` at
    /// every distinct size, ascending.
    pub size_cdf: Vec<(u32, f64)>,
    pub flows: Vec<FlowWindowStats>,
}

pub fn trace_stats<I>(records: I, modes: &[FlowKeyMode], window: u64) -> TraceStats
where
    I: IntoIterator<Item = PacketRecord>,
{
    let window = window.max(1);
    let mut sizes: BTreeMap<u32, u64> = BTreeMap::new();
    let mut open: Vec<HashSet<FlowKey>> = modes.iter().map(|_| HashSet::new()).collect();
    let mut closed: Vec<Vec<u64>> = modes.iter().map(|_| Vec::new()).collect();
    let mut packets = 0u64;
    for r in records {
        packets += 1;
        *sizes.entry(r.wire_len).or_default() += 1;
        for (set, &mode) in open.iter_mut().zip(modes) {
            set.insert(extract_key(&r, mode));
        }
        if packets.is_multiple_of(window) {
            for (set, done) in open.iter_mut().zip(closed.iter_mut()) {
                done.push(set.len() as u64);
                set.clear();
            }
        }
    }

    let mut acc = 0u64;
    let size_cdf = sizes
        .into_iter()
        .map(|(size, n)| {
            acc += n;
            (size, acc as f64 / packets as f64)
        })
        .collect();

    let flows = modes
        .iter()
        .zip(closed)
        .zip(open)
        .map(|((&key_mode, done), rest)| {
            let (counts, partial) = if done.is_empty() && packets > 0 {
                (vec![rest.len() as u64], true)
            } else {
                (done, false)
            };
            let mean = if counts.is_empty() {
                0.0
            } else {
                counts.iter().sum::<u64>() as f64 / counts.len() as f64
            };
            FlowWindowStats {
                key_mode,
                distinct_per_window: counts,
                mean,
                partial,
            }
        })
        .collect();

    TraceStats {
        packets,
        window,
        size_cdf,
        flows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic::{generate_synthetic, FlowModel, SizeModel, SyntheticSpec};

    #[test]
    fn cdf_counts_directly() {
        let recs = (0..10).map(|i| PacketRecord::non_ip(if i % 2 == 0 { 64 } else { 1500 }));
        let s = trace_stats(recs, &[], 1_000_000);
        assert_eq!(s.size_cdf, vec![(64, 0.5), (1500, 1.0)]);
    }

    #[test]
    fn single_flow_mean_is_one() {
        let spec = SyntheticSpec {
            num_packets: 2_000_000,
            size_model: SizeModel::Constant { bytes: 64 },
            flow_model: FlowModel::SingleFlow,
            seed: 1,
        };
        let s = trace_stats(
            generate_synthetic(&spec).unwrap(),
            &FlowKeyMode::ALL,
            1_000_000,
        );
        for f in &s.flows {
            assert_eq!(f.distinct_per_window, vec![1, 1]);
            assert_eq!(f.mean, 1.0);
            assert!(!f.partial);
        }
    }

    #[test]
    fn uniform_flow_counts_are_bounded() {
        let spec = SyntheticSpec {
            num_packets: 1_000_000,
            size_model: SizeModel::Constant { bytes: 64 },
            flow_model: FlowModel::Uniform { num_flows: 50_000 },
            seed: 2,
        };
        let s = trace_stats(
            generate_synthetic(&spec).unwrap(),
            &[FlowKeyMode::FiveTuple],
            1_000_000,
        );
        let n = s.flows[0].distinct_per_window[0];
        assert!((1..=50_000).contains(&n));
    }

    #[test]
    fn trailing_partial_window_excluded() {
        let recs = (0..25u32).map(|i| crate::trace::synthetic::flow_record(i, 64));
        let s = trace_stats(recs, &[FlowKeyMode::FiveTuple], 10);
        assert_eq!(s.flows[0].distinct_per_window, vec![10, 10]);
        assert_eq!(s.flows[0].mean, 10.0);
    }

    #[test]
    fn short_trace_reports_partial_window() {
        let recs = (0..3u32).map(|i| crate::trace::synthetic::flow_record(i, 64));
        let s = trace_stats(recs, &[FlowKeyMode::FiveTuple, FlowKeyMode::Global], 10);
        assert_eq!(s.flows[0].distinct_per_window, vec![3]);
        assert!(s.flows[0].partial);
        assert_eq!(s.flows[1].mean, 1.0);
    }
}
