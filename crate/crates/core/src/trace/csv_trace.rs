//! Plain-text trace format: `wire_len,src_ip,dst_ip,proto,sport,dport`,
//! one row per packet. Empty address fields mark a non-IP packet.

use std::borrow::Borrow;
use std::fs::File;
use std::io::{Read, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use super::PacketRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["wire_len", "src_ip", "dst_ip", "proto", "sport", "dport"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvMode {
    /// The first bad row ends the stream with an error.
    #[default]
    Strict,
    /// Bad rows are skipped and counted.
    Lenient,
}

pub struct CsvReader<R: Read> {
    inner: csv::Reader<R>,
    source: PathBuf,
    mode: CsvMode,
    row: csv::StringRecord,
    skipped: u64,
    done: bool,
}

pub fn read_csv(path: impl AsRef<Path>, mode: CsvMode) -> Result<CsvReader<File>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    CsvReader::new(file, path, mode)
}

impl<R: Read> CsvReader<R> {
    pub fn new(input: R, source: impl Into<PathBuf>, mode: CsvMode) -> Result<Self> {
        let source = source.into();
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = inner.headers()?;
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::InputFormat(format!(
                "{}: expected header `{}`",
                source.display(),
                CSV_HEADER.join(",")
            )));
        }
        Ok(CsvReader {
            inner,
            source,
            mode,
            row: csv::StringRecord::new(),
            skipped: 0,
            done: false,
        })
    }

    /// Rows dropped in lenient mode.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

impl<R: Read> Iterator for CsvReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.inner.read_record(&mut self.row) {
                Ok(false) => self.done = true,
                Ok(true) => {
                    let line = self.row.position().map_or(0, |p| p.line());
                    match parse_row(&self.row) {
                        Ok(r) => return Some(Ok(r)),
                        Err(_) if self.mode == CsvMode::Lenient => self.skipped += 1,
                        Err(message) => {
                            self.done = true;
                            return Some(Err(Error::CsvRow { line, message }));
                        }
                    }
                }
                Err(e) if self.mode == CsvMode::Lenient && !e.is_io_error() => self.skipped += 1,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        None
    }
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<PacketRecord, String> {
    if row.len() != CSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CSV_HEADER.len(),
            row.len()
        ));
    }
    let wire_len: u32 = row[0]
        .parse()
        .map_err(|_| format!("wire_len `{}` is not a number", &row[0]))?;
    if wire_len == 0 {
        return Err("wire_len must be positive".into());
    }
    let (src, dst) = (&row[1], &row[2]);
    if src.is_empty() && dst.is_empty() {
        return Ok(PacketRecord::non_ip(wire_len));
    }
    let src: IpAddr = src.parse().map_err(|_| format!("bad src_ip `{src}`"))?;
    let dst: IpAddr = dst.parse().map_err(|_| format!("bad dst_ip `{dst}`"))?;
    let proto: u8 = row[3]
        .parse()
        .map_err(|_| format!("bad proto `{}`", &row[3]))?;
    let sport: u16 = row[4]
        .parse()
        .map_err(|_| format!("bad sport `{}`", &row[4]))?;
    let dport: u16 = row[5]
        .parse()
        .map_err(|_| format!("bad dport `{}`", &row[5]))?;
    match (src, dst) {
        (IpAddr::V4(s), IpAddr::V4(d)) => {
            Ok(PacketRecord::ipv4(wire_len, s, d, proto, sport, dport))
        }
        (IpAddr::V6(s), IpAddr::V6(d)) => {
            Ok(PacketRecord::ipv6(wire_len, s, d, proto, sport, dport))
        }
        _ => Err("src_ip and dst_ip belong to different address families".into()),
    }
}

/// Writes records in the trace CSV format, header included.
pub fn write_csv<W, I>(out: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator,
    I::Item: Borrow<PacketRecord>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let r = r.borrow();
        let ip = |a: Option<IpAddr>| a.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            r.wire_len.to_string(),
            ip(r.src_ip()),
            ip(r.dst_ip()),
            r.proto.to_string(),
            r.src_port.to_string(),
            r.dst_port.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic::{generate_synthetic, FlowModel, SizeModel, SyntheticSpec};
    use crate::trace::IpVersion;
    use std::net::Ipv4Addr;

    fn read(text: &str, mode: CsvMode) -> (Vec<Result<PacketRecord>>, u64) {
        let mut r = CsvReader::new(text.as_bytes(), "mem", mode).unwrap();
        let out: Vec<_> = r.by_ref().collect();
        (out, r.skipped())
    }

    #[test]
    fn ipv4_row() {
        let (recs, _) = read(
            "wire_len,src_ip,dst_ip,proto,sport,dport\n64,10.0.0.1,10.0.0.2,6,1234,80\n",
            CsvMode::Strict,
        );
        let r = recs[0].as_ref().unwrap();
        assert_eq!(
            *r,
            PacketRecord::ipv4(
                64,
                Ipv4Addr::new(10, 0, 0, 1),
                Ipv4Addr::new(10, 0, 0, 2),
                6,
                1234,
                80
            )
        );
    }

    #[test]
    fn empty_addresses_are_non_ip() {
        let (recs, _) = read(
            "wire_len,src_ip,dst_ip,proto,sport,dport\n1500,,,0,0,0\n",
            CsvMode::Strict,
        );
        let r = recs[0].as_ref().unwrap();
        assert_eq!(r.ip_version, IpVersion::NonIp);
        assert_eq!(*r, PacketRecord::non_ip(1500));
    }

    #[test]
    fn ipv6_row() {
        let (recs, _) = read(
            "wire_len,src_ip,dst_ip,proto,sport,dport\n90,2001:db8::1,::1,17,53,53\n",
            CsvMode::Strict,
        );
        assert_eq!(recs[0].as_ref().unwrap().ip_version, IpVersion::V6);
    }

    #[test]
    fn strict_mode_reports_line() {
        let text = "wire_len,src_ip,dst_ip,proto,sport,dport\n64,10.0.0.1,10.0.0.2,6,1,2\nabc,10.0.0.1,10.0.0.2,6,1,2\n64,,,0,0,0\n";
        let (recs, _) = read(text, CsvMode::Strict);
        assert_eq!(recs.len(), 2);
        match &recs[1] {
            Err(Error::CsvRow { line, .. }) => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_skips_and_counts() {
        let text = "wire_len,src_ip,dst_ip,proto,sport,dport\n64,10.0.0.1,10.0.0.2,6,1,2\n64,10.0.0.999,10.0.0.2,6,1,2\n64,10.0.0.1,::1,6,1,2\n64,,,0,0,0\n";
        let (recs, skipped) = read(text, CsvMode::Lenient);
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.is_ok()));
        assert_eq!(skipped, 2);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(CsvReader::new("a,b,c\n".as_bytes(), "mem", CsvMode::Strict).is_err());
    }

    #[test]
    fn round_trip_of_synthetic_records() {
        let spec = SyntheticSpec {
            num_packets: 1000,
            size_model: SizeModel::Bimodal {
                p_small: 0.3,
                small_bytes: 64,
                large_bytes: 1500,
            },
            flow_model: FlowModel::Zipf {
                num_flows: 500,
                alpha: 1.1,
            },
            seed: 42,
        };
        let original: Vec<_> = generate_synthetic(&spec).unwrap().collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &original).unwrap();
        let (back, _) = read(std::str::from_utf8(&buf).unwrap(), CsvMode::Strict);
        let back: Vec<_> = back.into_iter().collect::<Result<_>>().unwrap();
        assert_eq!(back, original);
    }
}
