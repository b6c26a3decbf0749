//! Seeded synthetic traces, for when the real captures cannot be shared.
//!
//! Flow `f` always maps to the IPv4 5-tuple
//! `10.(f>>16).(f>>8).f:1000+(f mod 60000) -> 192.168.0.1:80/TCP`, so the
//! same spec and seed give byte-identical streams everywhere.

use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PacketRecord, PROTO_TCP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeModel {
    Constant {
        bytes: u32,
    },
    Bimodal {
        p_small: f64,
        small_bytes: u32,
        large_bytes: u32,
    },
    /// `(bytes, weight)` pairs; weights need not sum to one.
    Histogram {
        bins: Vec<(u32, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowModel {
    SingleFlow,
    Uniform {
        num_flows: u32,
    },
    /// Flow `k` (0-based) has weight `(k+1)^-alpha`.
    Zipf {
        num_flows: u32,
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_packets: u64,
    pub size_model: SizeModel,
    pub flow_model: FlowModel,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match &self.size_model {
            SizeModel::Constant { bytes } if *bytes == 0 => {
                return bad("constant size must be positive".into())
            }
            SizeModel::Bimodal {
                p_small,
                small_bytes,
                large_bytes,
            } => {
                if !(0.0..=1.0).contains(p_small) {
                    return bad(format!("p_small {p_small} outside [0, 1]"));
                }
                if *small_bytes == 0 || *large_bytes == 0 {
                    return bad("bimodal sizes must be positive".into());
                }
            }
            SizeModel::Histogram { bins } => {
                if bins.is_empty() {
                    return bad("histogram needs at least one bin".into());
                }
                if bins
                    .iter()
                    .any(|&(b, w)| b == 0 || !w.is_finite() || w < 0.0)
                {
                    return bad(
                        "histogram bins need positive sizes and non-negative weights".into(),
                    );
                }
                if bins.iter().map(|b| b.1).sum::<f64>() <= 0.0 {
                    return bad("histogram weights sum to zero".into());
                }
            }
            SizeModel::Constant { .. } => {}
        }
        match &self.flow_model {
            FlowModel::Uniform { num_flows: 0 } | FlowModel::Zipf { num_flows: 0, .. } => {
                bad("num_flows must be at least 1".into())
            }
            FlowModel::Zipf { alpha, .. } if !alpha.is_finite() || *alpha < 0.0 => bad(format!(
                "zipf alpha {alpha} must be finite and non-negative"
            )),
            _ => Ok(()),
        }
    }
}

/// Record for synthetic flow `flow_id`.
pub fn flow_record(flow_id: u32, wire_len: u32) -> PacketRecord {
    let f = flow_id;
    let src = Ipv4Addr::new(
        10,
        (f >> 16 & 255) as u8,
        (f >> 8 & 255) as u8,
        (f & 255) as u8,
    );
    let sport = 1000 + (f % 60000) as u16;
    PacketRecord::ipv4(
        wire_len,
        src,
        Ipv4Addr::new(192, 168, 0, 1),
        PROTO_TCP,
        sport,
        80,
    )
}

/// Inverse-CDF sampler over a finite weighted support.
#[derive(Debug, Clone)]
struct Cumulative {
    cdf: Vec<f64>,
}

impl Cumulative {
    fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Cumulative { cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

#[derive(Debug, Clone)]
enum SizeSampler {
    Constant(u32),
    Bimodal {
        p_small: f64,
        small: u32,
        large: u32,
    },
    Table {
        sizes: Vec<u32>,
        cdf: Cumulative,
    },
}

#[derive(Debug, Clone)]
enum FlowSampler {
    Single,
    Uniform(u32),
    Table(Cumulative),
}

/// Streaming generator; see [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    rng: ChaCha8Rng,
    sizes: SizeSampler,
    flows: FlowSampler,
    remaining: u64,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticTrace> {
    spec.validate()?;
    let sizes = match &spec.size_model {
        SizeModel::Constant { bytes } => SizeSampler::Constant(*bytes),
        SizeModel::Bimodal {
            p_small,
            small_bytes,
            large_bytes,
        } => SizeSampler::Bimodal {
            p_small: *p_small,
            small: *small_bytes,
            large: *large_bytes,
        },
        SizeModel::Histogram { bins } => SizeSampler::Table {
            sizes: bins.iter().map(|b| b.0).collect(),
            cdf: Cumulative::new(bins.iter().map(|b| b.1)),
        },
    };
    let flows = match &spec.flow_model {
        FlowModel::SingleFlow => FlowSampler::Single,
        FlowModel::Uniform { num_flows } => FlowSampler::Uniform(*num_flows),
        FlowModel::Zipf { num_flows, alpha } => FlowSampler::Table(Cumulative::new(
            (1..=*num_flows).map(|k| f64::from(k).powf(-alpha)),
        )),
    };
    Ok(SyntheticTrace {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        sizes,
        flows,
        remaining: spec.num_packets,
    })
}

impl Iterator for SyntheticTrace {
    type Item = PacketRecord;

    fn next(&mut self) -> Option<PacketRecord> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let rng = &mut self.rng;
        let size = match &self.sizes {
            SizeSampler::Constant(b) => *b,
            SizeSampler::Bimodal {
                p_small,
                small,
                large,
            } => {
                if rng.random::<f64>() < *p_small {
                    *small
                } else {
                    *large
                }
            }
            SizeSampler::Table { sizes, cdf } => sizes[cdf.sample(rng)],
        };
        let flow = match &self.flows {
            FlowSampler::Single => 0,
            FlowSampler::Uniform(n) => rng.random_range(0..*n),
            FlowSampler::Table(cdf) => cdf.sample(rng) as u32,
        };
        Some(flow_record(flow, size))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}
