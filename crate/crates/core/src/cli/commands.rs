use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, TraceSource};
use super::output::{write_atomic, write_csv_rows, write_json};
use crate::error::{Error, Result};
use crate::experiment::{
    run_prepared, sample_batches, scan_depths, silicon_overhead, Batch, DepthScan, PreparedBatches,
};
use crate::hazard::fdh_curve;
use crate::locking::{run_locking_batch_logged, write_events_csv};
use crate::trace::{
    generate_synthetic, read_csv, read_pcap, trace_stats, write_csv, CsvReader, PacketRecord,
    PcapReader, SyntheticTrace,
};

/// What a subcommand read, written next to its outputs as `run_info.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub command: &'static str,
    pub trace: String,
    pub packets_read: u64,
    pub batches: usize,
    /// The trace held fewer than `batch_size` packets.
    pub partial: bool,
    /// Pcap records whose captured length was cut short.
    pub pcap_truncated: u64,
    /// CSV rows skipped in lenient mode.
    pub csv_skipped: u64,
}

enum Source {
    Pcap(Box<PcapReader<BufReader<File>>>),
    Csv(Box<CsvReader<File>>),
    Synthetic(Box<SyntheticTrace>),
}

struct TraceReader {
    source: Source,
    read: u64,
}

impl TraceReader {
    fn open(cfg: &ExperimentConfig) -> Result<Self> {
        let source = match cfg.trace.as_ref() {
            Some(TraceSource::Pcap(path)) => Source::Pcap(Box::new(read_pcap(path)?)),
            Some(TraceSource::Csv(path)) => Source::Csv(Box::new(read_csv(path, cfg.csv_mode())?)),
            Some(TraceSource::Synthetic(spec)) => {
                Source::Synthetic(Box::new(generate_synthetic(spec)?))
            }
            None => return Err(Error::Config("no trace given".into())),
        };
        Ok(TraceReader { source, read: 0 })
    }

    fn info(&self, command: &'static str, cfg: &ExperimentConfig, batches: &[Batch]) -> RunInfo {
        RunInfo {
            command,
            trace: cfg.trace_label(),
            packets_read: self.read,
            batches: batches.len(),
            partial: batches.iter().any(|b| b.partial),
            pcap_truncated: match &self.source {
                Source::Pcap(r) => r.truncated(),
                _ => 0,
            },
            csv_skipped: match &self.source {
                Source::Csv(r) => r.skipped(),
                _ => 0,
            },
        }
    }
}

impl Iterator for TraceReader {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Result<PacketRecord>> {
        let item = match &mut self.source {
            Source::Pcap(r) => r.next(),
            Source::Csv(r) => r.next(),
            Source::Synthetic(r) => r.next().map(Ok),
        };
        if matches!(item, Some(Ok(_))) {
            self.read += 1;
        }
        item
    }
}

fn load_batches(cfg: &ExperimentConfig) -> Result<(Vec<Batch>, TraceReader)> {
    let mut reader = TraceReader::open(cfg)?;
    let batches = sample_batches(reader.by_ref(), cfg.batching)?;
    if batches.is_empty() {
        return Err(Error::InputFormat(format!(
            "trace `{}` contains no packets",
            cfg.trace_label()
        )));
    }
    Ok((batches, reader))
}

fn ns_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `size_cdf.csv` and `flows.csv`.
pub fn cmd_stats(cfg: &ExperimentConfig) -> Result<RunInfo> {
    let mut reader = TraceReader::open(cfg)?;
    let mut failure = None;
    let records = reader
        .by_ref()
        .map_while(|r| r.map_err(|e| failure = Some(e)).ok());
    let stats = trace_stats(records, &cfg.key_modes, cfg.window);
    if let Some(e) = failure {
        return Err(e);
    }

    write_csv_rows(
        &cfg.out.join("size_cdf.csv"),
        &["size", "cum_fraction"],
        stats
            .size_cdf
            .iter()
            .map(|(s, f)| vec![s.to_string(), f.to_string()]),
    )?;
    let mut rows = Vec::new();
    for f in &stats.flows {
        for (i, n) in f.distinct_per_window.iter().enumerate() {
            rows.push(vec![
                f.key_mode.to_string(),
                i.to_string(),
                n.to_string(),
                f.mean.to_string(),
            ]);
        }
    }
    write_csv_rows(
        &cfg.out.join("flows.csv"),
        &["key_mode", "window", "distinct_keys", "mean"],
        rows,
    )?;

    let mut info = reader.info("stats", cfg, &[]);
    info.partial = stats.flows.iter().any(|f| f.partial);
    write_json(&cfg.out.join("run_info.json"), &info)?;
    Ok(info)
}

/// `fdh.csv`: one row per key mode and depth `1..=n`.
pub fn cmd_fdh(cfg: &ExperimentConfig) -> Result<RunInfo> {
    let (batches, reader) = load_batches(cfg)?;
    let depths: Vec<u32> = (1..=cfg.n).collect();
    let trace = cfg.trace_label();
    let mut rows = Vec::new();
    for &mode in &cfg.key_modes {
        let curve = fdh_curve(&batches, mode, &depths, cfg.pipeline.clocking())?;
        for p in &curve.points {
            rows.push(vec![
                trace.clone(),
                mode.to_string(),
                p.depth.to_string(),
                p.fdh_p99.to_string(),
                curve.batches.to_string(),
            ]);
        }
    }
    write_csv_rows(
        &cfg.out.join("fdh.csv"),
        &["trace", "key_mode", "N", "fdh_p99", "batches"],
        rows,
    )?;
    let info = reader.info("fdh", cfg, &batches);
    write_json(&cfg.out.join("run_info.json"), &info)?;
    Ok(info)
}

/// `batches.csv` and `summary.csv` for depth `n` at every `(key mode, Q,
/// Q_len)`; with `debug_events`, one event log per batch under `events/`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunInfo> {
    let (batches, reader) = load_batches(cfg)?;
    let trace = cfg.trace_label();
    let mut batch_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for &mode in &cfg.key_modes {
        for &queues in &cfg.queues {
            let prepared =
                PreparedBatches::new(&batches, mode, &cfg.pipeline_at(cfg.n, queues, 1))?;
            for &queue_len in &cfg.queue_lens {
                let pc = cfg.pipeline_at(cfg.n, queues, queue_len);
                let s = run_prepared(&prepared, &pc)?;
                let head = [
                    trace.clone(),
                    mode.to_string(),
                    pc.depth.to_string(),
                    queues.to_string(),
                    queue_len.to_string(),
                ];
                for b in &s.batches {
                    let mut row = head.to_vec();
                    row.extend([
                        b.batch_index.to_string(),
                        b.fdh.to_string(),
                        b.throughput.to_string(),
                        b.latency_p99_cycles.to_string(),
                        b.latency_p99_ns.to_string(),
                        b.received.to_string(),
                        b.served.to_string(),
                        b.dropped.to_string(),
                    ]);
                    batch_rows.push(row);
                }
                let silicon = silicon_overhead(&pc, cfg.hlen_bytes);
                let mut row = head.to_vec();
                row.extend([
                    s.batches.len().to_string(),
                    s.throughput(cfg.aggregation).to_string(),
                    s.min_throughput.to_string(),
                    s.pooled_throughput.to_string(),
                    s.latency_p99_cycles.to_string(),
                    s.latency_p99_ns.to_string(),
                    silicon.queue_memory_bytes.to_string(),
                    silicon.comparator_count.to_string(),
                    silicon.comparator_bits.to_string(),
                ]);
                summary_rows.push(row);
                if cfg.debug_events {
                    write_event_logs(&cfg.out, &prepared, &pc, mode.as_str())?;
                }
            }
        }
    }
    write_csv_rows(
        &cfg.out.join("batches.csv"),
        &[
            "trace",
            "key_mode",
            "N",
            "Q",
            "Q_len",
            "batch_index",
            "fdh",
            "throughput",
            "latency_p99_cycles",
            "latency_p99_ns",
            "received",
            "served",
            "dropped",
        ],
        batch_rows,
    )?;
    write_csv_rows(
        &cfg.out.join("summary.csv"),
        &[
            "trace",
            "key_mode",
            "N",
            "Q",
            "Q_len",
            "batches",
            "throughput",
            "min_throughput",
            "pooled_throughput",
            "latency_p99_cycles",
            "latency_p99_ns",
            "queue_memory_bytes",
            "comparator_count",
            "comparator_bits",
        ],
        summary_rows,
    )?;
    let info = reader.info("run", cfg, &batches);
    write_json(&cfg.out.join("run_info.json"), &info)?;
    Ok(info)
}

fn write_event_logs(
    out: &Path,
    prepared: &PreparedBatches,
    pc: &crate::locking::PipelineConfig,
    mode: &str,
) -> Result<()> {
    (0..prepared.len()).into_par_iter().try_for_each(|i| {
        let mut events = Vec::new();
        run_locking_batch_logged(prepared.headers(i), pc, &mut events);
        let name = format!(
            "{mode}_n{}_q{}_qlen{}_batch{}.csv",
            pc.depth,
            pc.queues,
            pc.queue_len,
            prepared.batch_index(i)
        );
        write_atomic(&out.join("events").join(name), |w| {
            write_events_csv(w, &events)
        })
    })
}

/// `budget.csv`, rows ordered by target, then `Q_len`, `Q` and key mode.
pub fn cmd_budget(cfg: &ExperimentConfig) -> Result<RunInfo> {
    let (batches, reader) = load_batches(cfg)?;
    let trace = cfg.trace_label();
    // scans[mode][q][qlen]
    let mut scans: Vec<Vec<Vec<DepthScan>>> = Vec::new();
    for &mode in &cfg.key_modes {
        let mut per_q = Vec::new();
        for &queues in &cfg.queues {
            let prepared = PreparedBatches::new(&batches, mode, &cfg.pipeline_at(1, queues, 1))?;
            per_q.push(
                cfg.queue_lens
                    .iter()
                    .map(|&queue_len| {
                        scan_depths(&prepared, &cfg.pipeline_at(1, queues, queue_len), cfg.n)
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        scans.push(per_q);
    }

    let mut rows = Vec::new();
    for &target in &cfg.targets {
        for (li, &queue_len) in cfg.queue_lens.iter().enumerate() {
            for (qi, &queues) in cfg.queues.iter().enumerate() {
                for (mi, mode) in cfg.key_modes.iter().enumerate() {
                    let e = scans[mi][qi][li].budget(&trace, target, cfg.aggregation)?;
                    rows.push(vec![
                        e.trace,
                        mode.to_string(),
                        target.to_string(),
                        queue_len.to_string(),
                        queues.to_string(),
                        e.budget_n.to_string(),
                        ns_cell(e.latency_ns),
                    ]);
                }
            }
        }
    }
    write_csv_rows(
        &cfg.out.join("budget.csv"),
        &[
            "trace",
            "key_mode",
            "target",
            "Q_len",
            "Q",
            "budget_N",
            "latency_ns",
        ],
        rows,
    )?;
    let info = reader.info("budget", cfg, &batches);
    write_json(&cfg.out.join("run_info.json"), &info)?;
    Ok(info)
}

/// Materializes a synthetic trace; `out` is the CSV file to write.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<RunInfo> {
    let Some(TraceSource::Synthetic(spec)) = &cfg.trace else {
        return Err(Error::Config(
            "generate needs a synthetic trace spec".into(),
        ));
    };
    let trace = generate_synthetic(spec)?;
    write_atomic(&cfg.out, |w| write_csv(w, trace))?;
    Ok(RunInfo {
        command: "generate",
        trace: cfg.trace_label(),
        packets_read: spec.num_packets,
        batches: 0,
        partial: false,
        pcap_truncated: 0,
        csv_skipped: 0,
    })
}
