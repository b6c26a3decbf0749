//! Measurement methodology: sampled batches, nearest-rank percentiles,
//! per-batch throughput/latency, the clock-cycle budget search and the
//! silicon cost of the locking front end.

mod budget;
mod metrics;

use serde::{Deserialize, Serialize};

pub use budget::{
    budget_search, meets_target, scan_depths, BudgetEntry, DepthScan, MAX_BUDGET_DEPTH,
};
pub use metrics::{
    run_experiment, run_prepared, BatchMetrics, ExperimentSummary, PreparedBatches,
    ThroughputAggregation,
};

use crate::error::{Error, Result};
use crate::locking::PipelineConfig;
use crate::trace::PacketRecord;

/// Nearest-rank percentile: the element at 1-based rank `ceil(p/100 * n)`
/// of the sorted samples.
pub fn percentile<T: Copy + PartialOrd>(samples: &[T], p: f64) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Config(format!("percentile {p} outside (0, 100]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must be comparable"));
    let n = sorted.len();
    // the epsilon keeps e.g. 99.9% of 1000 at rank 999 despite rounding
    let rank = ((p * n as f64 / 100.0) - 1e-9).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchingPolicy {
    /// Consecutive packets per batch.
    pub batch_size: u64,
    /// Packets between the starts of two sampled batches.
    pub batch_stride: u64,
}

impl Default for BatchingPolicy {
    fn default() -> Self {
        BatchingPolicy {
            batch_size: 100_000,
            batch_stride: 10_000_000,
        }
    }
}

impl BatchingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.batch_stride < self.batch_size {
            return Err(Error::Config(format!(
                "batch_stride {} is smaller than batch_size {}",
                self.batch_stride, self.batch_size
            )));
        }
        Ok(())
    }
}

/// A sampled run of consecutive packets. Simulator state never carries
/// over from one batch to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Position of the batch in the sampling grid (start = index * stride).
    pub index: u64,
    pub records: Vec<PacketRecord>,
    /// Shorter than `batch_size`; only produced when the whole trace is.
    pub partial: bool,
}

/// Cuts a record stream into sampled batches.
///
/// Batch `k` covers packets `[k*stride, k*stride + size)`. An incomplete
/// trailing batch is discarded unless the trace yields no complete batch at
/// all, in which case it is emitted flagged as partial.
pub struct BatchSampler<I> {
    inner: I,
    policy: BatchingPolicy,
    position: u64,
    current: Vec<PacketRecord>,
    emitted: u64,
    done: bool,
}

impl<I> BatchSampler<I>
where
    I: Iterator<Item = Result<PacketRecord>>,
{
    pub fn new(inner: I, policy: BatchingPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(BatchSampler {
            inner,
            policy,
            position: 0,
            current: Vec::new(),
            emitted: 0,
            done: false,
        })
    }
}

impl<I> Iterator for BatchSampler<I>
where
    I: Iterator<Item = Result<PacketRecord>>,
{
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Result<Batch>> {
        while !self.done {
            match self.inner.next() {
                None => {
                    self.done = true;
                    if self.emitted == 0 && !self.current.is_empty() {
                        self.emitted += 1;
                        return Some(Ok(Batch {
                            index: 0,
                            records: std::mem::take(&mut self.current),
                            partial: true,
                        }));
                    }
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Some(Ok(record)) => {
                    let pos = self.position;
                    self.position += 1;
                    if pos % self.policy.batch_stride < self.policy.batch_size {
                        self.current.push(record);
                        if self.current.len() as u64 == self.policy.batch_size {
                            self.emitted += 1;
                            return Some(Ok(Batch {
                                index: pos / self.policy.batch_stride,
                                records: std::mem::take(&mut self.current),
                                partial: false,
                            }));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Collects every sampled batch of `records`.
pub fn sample_batches<I>(records: I, policy: BatchingPolicy) -> Result<Vec<Batch>>
where
    I: IntoIterator<Item = Result<PacketRecord>>,
{
    BatchSampler::new(records.into_iter(), policy)?.collect()
}

/// Area cost of the locking front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiliconOverhead {
    /// `H_len * Q * Q_len`, with the header slot size in bytes.
    pub queue_memory_bytes: u64,
    pub queue_memory_bits: u64,
    /// `Q * N` comparators of `W` bits each.
    pub comparator_count: u64,
    pub comparator_bits: u64,
}

pub fn silicon_overhead(config: &PipelineConfig, h_len_bytes: u64) -> SiliconOverhead {
    let queue_memory_bytes = h_len_bytes * u64::from(config.queues) * config.queue_len as u64;
    let comparator_count = u64::from(config.queues) * u64::from(config.depth);
    SiliconOverhead {
        queue_memory_bytes,
        queue_memory_bits: queue_memory_bytes * 8,
        comparator_count,
        comparator_bits: comparator_count * u64::from(config.w_bits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percentile_examples() {
        let hundred: Vec<u32> = (1..=100).collect();
        assert_eq!(percentile(&hundred, 99.0).unwrap(), 99);
        assert_eq!(percentile(&hundred, 100.0).unwrap(), 100);
        assert_eq!(percentile(&[7.5], 1.0).unwrap(), 7.5);
        assert_eq!(percentile(&[7.5], 99.0).unwrap(), 7.5);
        assert_eq!(percentile(&[5, 1, 3], 50.0).unwrap(), 3);
        let thousand: Vec<u32> = (1..=1000).collect();
        assert_eq!(percentile(&thousand, 99.9).unwrap(), 999);
    }

    #[test]
    fn percentile_errors() {
        assert!(matches!(
            percentile::<u32>(&[], 99.0),
            Err(Error::EmptySamples)
        ));
        assert!(percentile(&[1], 0.0).is_err());
        assert!(percentile(&[1], 100.5).is_err());
    }

    proptest! {
        #[test]
        fn percentile_matches_sort_and_index(
            samples in proptest::collection::vec(0u32..1000, 1..300),
            p in 1u32..=100,
        ) {
            let mut sorted = samples.clone();
            sorted.sort_unstable();
            // smallest rank r with r/n >= p/100, found by walking
            let n = sorted.len() as u64;
            let rank = (1..=n).find(|&r| r * 100 >= u64::from(p) * n).unwrap();
            prop_assert_eq!(percentile(&samples, f64::from(p)).unwrap(), sorted[rank as usize - 1]);
        }
    }

    fn records(n: u32) -> impl Iterator<Item = Result<PacketRecord>> {
        (0..n).map(|i| Ok(PacketRecord::non_ip(i + 1)))
    }

    #[test]
    fn sampler_picks_one_batch_per_stride() {
        let policy = BatchingPolicy {
            batch_size: 3,
            batch_stride: 10,
        };
        let batches = sample_batches(records(35), policy).unwrap();
        let starts: Vec<_> = batches
            .iter()
            .map(|b| (b.index, b.records[0].wire_len, b.records.len()))
            .collect();
        assert_eq!(starts, vec![(0, 1, 3), (1, 11, 3), (2, 21, 3), (3, 31, 3)]);
        assert!(batches.iter().all(|b| !b.partial));
    }

    #[test]
    fn sampler_drops_trailing_partial() {
        let policy = BatchingPolicy {
            batch_size: 4,
            batch_stride: 10,
        };
        let batches = sample_batches(records(12), policy).unwrap();
        assert_eq!(batches.len(), 1);
    }

    #[test]
    fn sampler_keeps_lone_partial() {
        let policy = BatchingPolicy {
            batch_size: 100,
            batch_stride: 1000,
        };
        let batches = sample_batches(records(42), policy).unwrap();
        assert_eq!(batches.len(), 1);
        assert!(batches[0].partial);
        assert_eq!(batches[0].records.len(), 42);
        assert!(sample_batches(records(0), policy).unwrap().is_empty());
    }

    #[test]
    fn sampler_rejects_bad_policy() {
        assert!(BatchSampler::new(
            records(1),
            BatchingPolicy {
                batch_size: 10,
                batch_stride: 5
            }
        )
        .is_err());
        assert!(BatchSampler::new(
            records(1),
            BatchingPolicy {
                batch_size: 0,
                batch_stride: 5
            }
        )
        .is_err());
    }

    #[test]
    fn silicon_examples() {
        let cfg = PipelineConfig {
            queues: 4,
            queue_len: 100,
            ..Default::default()
        };
        assert_eq!(silicon_overhead(&cfg, 88).queue_memory_bytes, 35_200);
        let one = PipelineConfig {
            queues: 1,
            queue_len: 1,
            ..Default::default()
        };
        assert_eq!(silicon_overhead(&one, 123).queue_memory_bytes, 123);
        let cmp = PipelineConfig {
            queues: 4,
            depth: 30,
            w_bits: 4,
            ..Default::default()
        };
        let s = silicon_overhead(&cmp, 88);
        assert_eq!((s.comparator_count, s.comparator_bits), (120, 480));
    }
}
