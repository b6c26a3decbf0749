//! Packet records and the ways to obtain them: classic pcap files, CSV
//! traces and seeded synthetic generators. Also assigns the cycle at which
//! each packet is completely received.

mod clock;
mod csv_trace;
mod pcap;
mod stats;
pub mod synthetic;

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

pub use clock::{assign_clocks, ClockedHeader, Clocking, HeaderBuilder};
pub use csv_trace::{read_csv, write_csv, CsvMode, CsvReader, CSV_HEADER};
pub use pcap::{read_pcap, LinkType, PcapReader};
pub use stats::{trace_stats, FlowWindowStats, TraceStats};
pub use synthetic::{generate_synthetic, FlowModel, SizeModel, SyntheticSpec, SyntheticTrace};

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpVersion {
    V4,
    V6,
    NonIp,
}

/// One trace packet: its on-wire length plus the header fields that can
/// identify its flow.
///
/// IPv4 addresses are stored zero-extended in the low 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacketRecord {
    pub wire_len: u32,
    pub ip_version: IpVersion,
    pub src_addr: u128,
    pub dst_addr: u128,
    pub proto: u8,
    pub src_port: u16,
    pub dst_port: u16,
}

impl PacketRecord {
    pub fn non_ip(wire_len: u32) -> Self {
        PacketRecord {
            wire_len: wire_len.max(1),
            ip_version: IpVersion::NonIp,
            src_addr: 0,
            dst_addr: 0,
            proto: 0,
            src_port: 0,
            dst_port: 0,
        }
    }

    pub fn ipv4(
        wire_len: u32,
        src: Ipv4Addr,
        dst: Ipv4Addr,
        proto: u8,
        src_port: u16,
        dst_port: u16,
    ) -> Self {
        PacketRecord {
            wire_len: wire_len.max(1),
            ip_version: IpVersion::V4,
            src_addr: u128::from(u32::from(src)),
            dst_addr: u128::from(u32::from(dst)),
            proto,
            src_port,
            dst_port,
        }
        .normalized()
    }

    pub fn ipv6(
        wire_len: u32,
        src: Ipv6Addr,
        dst: Ipv6Addr,
        proto: u8,
        src_port: u16,
        dst_port: u16,
    ) -> Self {
        PacketRecord {
            wire_len: wire_len.max(1),
            ip_version: IpVersion::V6,
            src_addr: u128::from(src),
            dst_addr: u128::from(dst),
            proto,
            src_port,
            dst_port,
        }
        .normalized()
    }

    /// Ports only carry meaning for TCP and UDP.
    fn normalized(mut self) -> Self {
        if self.proto != PROTO_TCP && self.proto != PROTO_UDP {
            self.src_port = 0;
            self.dst_port = 0;
        }
        self
    }

    pub fn src_ip(&self) -> Option<IpAddr> {
        addr(self.ip_version, self.src_addr)
    }

    pub fn dst_ip(&self) -> Option<IpAddr> {
        addr(self.ip_version, self.dst_addr)
    }
}

fn addr(version: IpVersion, raw: u128) -> Option<IpAddr> {
    match version {
        IpVersion::V4 => Some(IpAddr::V4(Ipv4Addr::from(raw as u32))),
        IpVersion::V6 => Some(IpAddr::V6(Ipv6Addr::from(raw))),
        IpVersion::NonIp => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ports_cleared_for_non_transport_protocols() {
        let r = PacketRecord::ipv4(64, Ipv4Addr::LOCALHOST, Ipv4Addr::LOCALHOST, 1, 5, 6);
        assert_eq!((r.src_port, r.dst_port), (0, 0));
        let r = PacketRecord::ipv4(
            64,
            Ipv4Addr::LOCALHOST,
            Ipv4Addr::LOCALHOST,
            PROTO_UDP,
            5,
            6,
        );
        assert_eq!((r.src_port, r.dst_port), (5, 6));
    }

    #[test]
    fn wire_len_is_at_least_one() {
        assert_eq!(PacketRecord::non_ip(0).wire_len, 1);
    }
}
