use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CommonArgs, TraceFormat};
use crate::error::{Error, Result};
use crate::experiment::{BatchingPolicy, ThroughputAggregation, MAX_BUDGET_DEPTH};
use crate::flow::FlowKeyMode;
use crate::locking::PipelineConfig;
use crate::trace::{CsvMode, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Pcap(PathBuf),
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Everything a subcommand needs. Loaded from one JSON document, then
/// overridden flag by flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trace: Option<TraceSource>,
    /// Label for the `trace` column; defaults to the file stem.
    pub trace_id: Option<String>,
    pub key_modes: Vec<FlowKeyMode>,
    /// Pipeline parameters. `depth`, `queues` and `queue_len` are taken
    /// from `n`, `queues` and `queue_lens` below.
    pub pipeline: PipelineConfig,
    /// Largest depth for `fdh` and `budget`; the depth simulated by `run`.
    pub n: u32,
    pub queues: Vec<u32>,
    pub queue_lens: Vec<usize>,
    pub targets: Vec<f64>,
    pub batching: BatchingPolicy,
    pub aggregation: ThroughputAggregation,
    /// Packets per window when counting distinct flows.
    pub window: u64,
    /// Header slot size for the silicon estimate.
    pub hlen_bytes: u64,
    pub csv_lenient: bool,
    pub debug_events: bool,
    /// Overrides the seed of a synthetic trace.
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trace: None,
            trace_id: None,
            key_modes: FlowKeyMode::ALL.to_vec(),
            pipeline: PipelineConfig::default(),
            n: MAX_BUDGET_DEPTH,
            queues: vec![1, 4, 8, 16],
            queue_lens: vec![10, 100],
            targets: vec![1.0, 0.999, 0.99],
            batching: BatchingPolicy::default(),
            aggregation: ThroughputAggregation::Min,
            window: 1_000_000,
            hlen_bytes: 88,
            csv_lenient: false,
            debug_events: false,
            seed: None,
            out: PathBuf::from("out"),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn infer_format(path: &Path) -> Result<TraceFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pcap" | "cap") => Ok(TraceFormat::Pcap),
        Some("csv") => Ok(TraceFormat::Csv),
        Some("json") => Ok(TraceFormat::Synthetic),
        _ => Err(Error::Config(format!(
            "cannot infer the format of {}; pass --format",
            path.display()
        ))),
    }
}

impl ExperimentConfig {
    /// `--config` file (if any) with every given flag applied on top.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => read_json::<ExperimentConfig>(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &args.trace {
            let format = match args.format {
                Some(f) => f,
                None => infer_format(path)?,
            };
            cfg.trace = Some(match format {
                TraceFormat::Pcap => TraceSource::Pcap(path.clone()),
                TraceFormat::Csv => TraceSource::Csv(path.clone()),
                TraceFormat::Synthetic => TraceSource::Synthetic(read_json(path)?),
            });
            if cfg.trace_id.is_none() {
                cfg.trace_id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
        }
        if let Some(v) = &args.trace_id {
            cfg.trace_id = Some(v.clone());
        }
        if !args.key.is_empty() {
            cfg.key_modes = args.key.clone();
        }
        if let Some(v) = args.n {
            cfg.n = v;
        }
        if !args.q.is_empty() {
            cfg.queues = args.q.clone();
        }
        if !args.qlen.is_empty() {
            cfg.queue_lens = args.qlen.clone();
        }
        if !args.targets.is_empty() {
            cfg.targets = args.targets.clone();
        }
        let p = &mut cfg.pipeline;
        if let Some(v) = args.w_bits {
            p.w_bits = v;
        }
        if let Some(v) = args.chunk_bytes {
            p.chunk_bytes = v;
        }
        if let Some(v) = args.gap_cycles {
            p.gap_cycles = v;
        }
        if let Some(v) = args.clock_ghz {
            p.clock_ghz = v;
        }
        if let Some(v) = args.lock_window {
            p.lock_window = v;
        }
        if let Some(v) = args.batch_size {
            cfg.batching.batch_size = v;
        }
        if let Some(v) = args.batch_stride {
            cfg.batching.batch_stride = v;
        }
        if let Some(v) = args.aggregate {
            cfg.aggregation = v;
        }
        if let Some(v) = args.window {
            cfg.window = v;
        }
        if let Some(v) = args.hlen_bytes {
            cfg.hlen_bytes = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = &args.out {
            cfg.out = v.clone();
        }
        cfg.csv_lenient |= args.csv_lenient;
        cfg.debug_events |= args.debug_events;
        if let (Some(seed), Some(TraceSource::Synthetic(spec))) = (cfg.seed, cfg.trace.as_mut()) {
            spec.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match &self.trace {
            None => return bad("no trace given; pass --trace or set `trace` in the config".into()),
            Some(TraceSource::Pcap(p) | TraceSource::Csv(p)) if !p.is_file() => {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "trace file not found"),
                ));
            }
            Some(TraceSource::Synthetic(spec)) => spec.validate()?,
            Some(_) => {}
        }
        if self.key_modes.is_empty() {
            return bad("no key modes selected".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.queues.is_empty() || self.queue_lens.is_empty() {
            return bad("Q and Q_len lists must not be empty".into());
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return bad(format!("throughput target {t} outside (0, 1]"));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        self.batching.validate()?;
        for &queues in &self.queues {
            for &queue_len in &self.queue_lens {
                self.pipeline_at(self.n, queues, queue_len).validate()?;
            }
        }
        Ok(())
    }

    pub fn pipeline_at(&self, depth: u32, queues: u32, queue_len: usize) -> PipelineConfig {
        PipelineConfig {
            depth,
            queues,
            queue_len,
            ..self.pipeline
        }
    }

    pub fn trace_label(&self) -> String {
        match (&self.trace_id, &self.trace) {
            (Some(id), _) => id.clone(),
            (None, Some(TraceSource::Pcap(p) | TraceSource::Csv(p))) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            _ => "synthetic".into(),
        }
    }

    pub fn csv_mode(&self) -> CsvMode {
        if self.csv_lenient {
            CsvMode::Lenient
        } else {
            CsvMode::Strict
        }
    }
}
