//! Flow keys at the four aggregation levels, and the hash-based dispatch of
//! a key onto a queue index and a compressed scheduler key `w`.

mod crc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use crc::{crc16, Crc16, HashParams};

use crate::error::{Error, Result};
use crate::trace::{IpVersion, PacketRecord};

/// Aggregation level that decides which packets share a state cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowKeyMode {
    #[serde(rename = "5tuple", alias = "five_tuple")]
    FiveTuple,
    #[serde(rename = "ipdst")]
    IpDst,
    #[serde(rename = "ipdst16")]
    IpDst16,
    #[serde(rename = "global")]
    Global,
}

impl FlowKeyMode {
    pub const ALL: [FlowKeyMode; 4] = [
        FlowKeyMode::FiveTuple,
        FlowKeyMode::IpDst,
        FlowKeyMode::IpDst16,
        FlowKeyMode::Global,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowKeyMode::FiveTuple => "5tuple",
            FlowKeyMode::IpDst => "ipdst",
            FlowKeyMode::IpDst16 => "ipdst16",
            FlowKeyMode::Global => "global",
        }
    }
}

impl fmt::Display for FlowKeyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowKeyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5tuple" | "five_tuple" => Ok(FlowKeyMode::FiveTuple),
            "ipdst" => Ok(FlowKeyMode::IpDst),
            "ipdst16" => Ok(FlowKeyMode::IpDst16),
            "global" => Ok(FlowKeyMode::Global),
            other => Err(Error::Config(format!("unknown key mode `{other}`"))),
        }
    }
}

const MAX_KEY_LEN: usize = 37;

/// Canonical byte string naming the state cell a packet touches.
///
/// Two packets share state exactly when their keys compare equal.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowKey {
    mode: FlowKeyMode,
    len: u8,
    buf: [u8; MAX_KEY_LEN],
}

impl FlowKey {
    fn from_slice(mode: FlowKeyMode, bytes: &[u8]) -> Self {
        let mut buf = [0u8; MAX_KEY_LEN];
        buf[..bytes.len()].copy_from_slice(bytes);
        FlowKey {
            mode,
            len: bytes.len() as u8,
            buf,
        }
    }

    pub fn mode(&self) -> FlowKeyMode {
        self.mode
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf[..self.len as usize]
    }

    /// Key width in bits (`FK_len`) of this serialization.
    pub fn bit_len(&self) -> usize {
        self.len as usize * 8
    }
}

impl fmt::Debug for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FlowKey({}, 0x", self.mode)?;
        for b in self.as_bytes() {
            write!(f, "{b:02X}")?;
        }
        f.write_str(")")
    }
}

/// Serializes the fields selected by `mode` in network byte order.
///
/// IPv4 addresses occupy 4 bytes, IPv6 16. Non-IP records map to the
/// all-zero key of the mode's IPv4 width.
pub fn extract_key(record: &PacketRecord, mode: FlowKeyMode) -> FlowKey {
    if mode == FlowKeyMode::Global {
        return FlowKey::from_slice(mode, &[0]);
    }
    let addr_len = match record.ip_version {
        IpVersion::V6 => 16,
        IpVersion::V4 | IpVersion::NonIp => 4,
    };
    let src = record.src_addr.to_be_bytes();
    let dst = record.dst_addr.to_be_bytes();
    let src = &src[16 - addr_len..];
    let dst = &dst[16 - addr_len..];

    let mut buf = [0u8; MAX_KEY_LEN];
    let len = match mode {
        FlowKeyMode::FiveTuple => {
            let mut at = 0;
            for part in [
                src,
                dst,
                &[record.proto][..],
                &record.src_port.to_be_bytes()[..],
                &record.dst_port.to_be_bytes()[..],
            ] {
                buf[at..at + part.len()].copy_from_slice(part);
                at += part.len();
            }
            at
        }
        FlowKeyMode::IpDst => {
            buf[..addr_len].copy_from_slice(dst);
            addr_len
        }
        FlowKeyMode::IpDst16 => {
            buf[..2].copy_from_slice(&dst[..2]);
            2
        }
        FlowKeyMode::Global => unreachable!(),
    };
    FlowKey::from_slice(mode, &buf[..len])
}

/// Maps a flow key onto `(queue_index, w)` with a single hash evaluation:
/// `queue_index = h mod Q`, `w = h mod 2^W`.
#[derive(Debug, Clone)]
pub struct Dispatcher {
    queues: u32,
    w_bits: u8,
    crc: Crc16,
}

impl Dispatcher {
    pub fn new(queues: u32, w_bits: u8, params: HashParams) -> Result<Self> {
        if queues == 0 {
            return Err(Error::Config("Q must be at least 1".into()));
        }
        if !(1..=16).contains(&w_bits) {
            return Err(Error::Config(format!("W must be in 1..=16, got {w_bits}")));
        }
        Ok(Dispatcher {
            queues,
            w_bits,
            crc: Crc16::new(params),
        })
    }

    pub fn queues(&self) -> u32 {
        self.queues
    }

    pub fn w_bits(&self) -> u8 {
        self.w_bits
    }

    pub fn hash(&self, key: &FlowKey) -> u16 {
        self.crc.checksum(key.as_bytes())
    }

    pub fn dispatch(&self, key: &FlowKey) -> (u32, u16) {
        let h = self.hash(key);
        let mask = ((1u32 << self.w_bits) - 1) as u16;
        (u32::from(h) % self.queues, h & mask)
    }
}

/// Free-function form of [`Dispatcher::dispatch`].
pub fn dispatch(key: &FlowKey, queues: u32, w_bits: u8, params: &HashParams) -> Result<(u32, u16)> {
    Ok(Dispatcher::new(queues, w_bits, *params)?.dispatch(key))
}
