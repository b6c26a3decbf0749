//! Classic libpcap reader.
//!
//! Decodes Ethernet (with any number of 802.1Q/802.1ad tags), raw IP and
//! Linux cooked (SLL) captures down to the 5-tuple. Timestamps are read and
//! discarded. The on-wire length comes from the record's original-length
//! field so snapped captures still carry the real size.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use super::{PacketRecord, PROTO_TCP, PROTO_UDP};
use crate::error::{Error, Result};

const MAGIC_USEC: u32 = 0xa1b2_c3d4;
const MAGIC_NSEC: u32 = 0xa1b2_3c4d;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;
const ETHERTYPE_QINQ_OLD: u16 = 0x9100;

const IPV6_HOP_BY_HOP: u8 = 0;
const IPV6_ROUTING: u8 = 43;
const IPV6_FRAGMENT: u8 = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkType {
    Ethernet,
    RawIp,
    LinuxSll,
}

impl LinkType {
    fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(LinkType::Ethernet),
            // DLT_RAW has several historical numbers.
            12 | 14 | 101 | 228 | 229 => Some(LinkType::RawIp),
            113 => Some(LinkType::LinuxSll),
            _ => None,
        }
    }
}

/// Streaming reader over the frames of a classic pcap file.
pub struct PcapReader<R> {
    inner: R,
    source: PathBuf,
    big_endian: bool,
    link: LinkType,
    truncated: u64,
    done: bool,
    buf: Vec<u8>,
}

pub fn read_pcap(path: impl AsRef<Path>) -> Result<PcapReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    PcapReader::new(BufReader::new(file), path)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut header = [0u8; 24];
        let n = read_full(&mut inner, &mut header).map_err(|e| Error::io(&source, e))?;
        if n < header.len() {
            return Err(Error::InputFormat(format!(
                "{}: pcap global header truncated ({n} of 24 bytes)",
                source.display()
            )));
        }
        let magic_le = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let big_endian = match magic_le {
            MAGIC_USEC | MAGIC_NSEC => false,
            m if m.swap_bytes() == MAGIC_USEC || m.swap_bytes() == MAGIC_NSEC => true,
            m => {
                return Err(Error::InputFormat(format!(
                    "{}: not a classic pcap file (magic {m:#010x})",
                    source.display()
                )))
            }
        };
        let code = read_u32(&header[20..24], big_endian) & 0x0fff_ffff;
        let link = LinkType::from_code(code).ok_or_else(|| {
            Error::InputFormat(format!(
                "{}: unsupported link type {code}",
                source.display()
            ))
        })?;
        Ok(PcapReader {
            inner,
            source,
            big_endian,
            link,
            truncated: 0,
            done: false,
            buf: Vec::new(),
        })
    }

    pub fn link_type(&self) -> LinkType {
        self.link
    }

    /// Number of truncated record headers or bodies seen; reading stops at
    /// the first one.
    pub fn truncated(&self) -> u64 {
        self.truncated
    }

    fn next_record(&mut self) -> Result<Option<PacketRecord>> {
        let mut rec = [0u8; 16];
        let n = read_full(&mut self.inner, &mut rec).map_err(|e| Error::io(&self.source, e))?;
        if n == 0 {
            return Ok(None);
        }
        if n < rec.len() {
            self.truncated += 1;
            return Ok(None);
        }
        let incl_len = read_u32(&rec[8..12], self.big_endian);
        let orig_len = read_u32(&rec[12..16], self.big_endian);
        // Guard against garbage lengths before allocating.
        if incl_len > 0x0400_0000 {
            return Err(Error::InputFormat(format!(
                "{}: record length {incl_len} is implausible",
                self.source.display()
            )));
        }
        self.buf.resize(incl_len as usize, 0);
        let n =
            read_full(&mut self.inner, &mut self.buf).map_err(|e| Error::io(&self.source, e))?;
        if n < self.buf.len() {
            self.truncated += 1;
            return Ok(None);
        }
        let wire_len = orig_len.max(incl_len).max(1);
        Ok(Some(decode_frame(self.link, &self.buf, wire_len)))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_u32(b: &[u8], big_endian: bool) -> u32 {
    let arr: [u8; 4] = b.try_into().unwrap();
    if big_endian {
        u32::from_be_bytes(arr)
    } else {
        u32::from_le_bytes(arr)
    }
}

fn be16(b: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_be_bytes(b.get(at..at + 2)?.try_into().ok()?))
}

pub(crate) fn decode_frame(link: LinkType, frame: &[u8], wire_len: u32) -> PacketRecord {
    let l3 = match link {
        LinkType::Ethernet => ethernet_payload(frame, 12),
        LinkType::LinuxSll => ethernet_payload(frame, 14),
        LinkType::RawIp => match frame.first().map(|b| b >> 4) {
            Some(4) => Some((ETHERTYPE_IPV4, frame)),
            Some(6) => Some((ETHERTYPE_IPV6, frame)),
            _ => None,
        },
    };
    match l3 {
        Some((ETHERTYPE_IPV4, ip)) => decode_ipv4(ip, wire_len),
        Some((ETHERTYPE_IPV6, ip)) => decode_ipv6(ip, wire_len),
        _ => None,
    }
    .unwrap_or_else(|| PacketRecord::non_ip(wire_len))
}

/// Returns the ethertype and payload after skipping VLAN tags. `type_at` is
/// the offset of the first type field (12 for Ethernet, 14 for SLL).
fn ethernet_payload(frame: &[u8], type_at: usize) -> Option<(u16, &[u8])> {
    let mut at = type_at;
    let mut ethertype = be16(frame, at)?;
    while matches!(
        ethertype,
        ETHERTYPE_VLAN | ETHERTYPE_QINQ | ETHERTYPE_QINQ_OLD
    ) {
        at += 4;
        ethertype = be16(frame, at)?;
    }
    Some((ethertype, frame.get(at + 2..)?))
}

fn ports(l4: &[u8], proto: u8) -> (u16, u16) {
    if proto != PROTO_TCP && proto != PROTO_UDP {
        return (0, 0);
    }
    match (be16(l4, 0), be16(l4, 2)) {
        (Some(s), Some(d)) => (s, d),
        _ => (0, 0),
    }
}

fn decode_ipv4(ip: &[u8], wire_len: u32) -> Option<PacketRecord> {
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let proto = ip[9];
    let frag_offset = be16(ip, 6)? & 0x1fff;
    let src: [u8; 4] = ip[12..16].try_into().ok()?;
    let dst: [u8; 4] = ip[16..20].try_into().ok()?;
    let (sport, dport) = if frag_offset == 0 {
        ports(&ip[ihl..], proto)
    } else {
        (0, 0)
    };
    Some(PacketRecord::ipv4(
        wire_len,
        src.into(),
        dst.into(),
        proto,
        sport,
        dport,
    ))
}

fn decode_ipv6(ip: &[u8], wire_len: u32) -> Option<PacketRecord> {
    if ip.len() < 40 || ip[0] >> 4 != 6 {
        return None;
    }
    let src: [u8; 16] = ip[8..24].try_into().ok()?;
    let dst: [u8; 16] = ip[24..40].try_into().ok()?;
    let mut next = ip[6];
    let mut at = 40;
    let mut has_l4 = true;
    loop {
        match next {
            IPV6_HOP_BY_HOP | IPV6_ROUTING => {
                let Some(hdr) = ip.get(at..at + 2) else {
                    has_l4 = false;
                    break;
                };
                next = hdr[0];
                at += (usize::from(hdr[1]) + 1) * 8;
            }
            IPV6_FRAGMENT => {
                let Some(hdr) = ip.get(at..at + 8) else {
                    has_l4 = false;
                    break;
                };
                next = hdr[0];
                at += 8;
                if be16(hdr, 2)? >> 3 != 0 {
                    has_l4 = false;
                    break;
                }
            }
            _ => break,
        }
    }
    let (sport, dport) = match (has_l4, ip.get(at..)) {
        (true, Some(l4)) => ports(l4, next),
        _ => (0, 0),
    };
    Some(PacketRecord::ipv6(
        wire_len,
        src.into(),
        dst.into(),
        next,
        sport,
        dport,
    ))
}
