//! Time-tag and histogram files.
//!
//! Text files start with `# key=value` header lines, followed by a column
//! header and one CSV row per record. The binary time-tag variant carries the
//! same header text, length-prefixed, then fixed-width little-endian records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::CoincidenceHistogram;
use crate::error::{Error, Result};
use crate::timetag::{TimeTag, TimeTagStream};

pub const FORMAT_VERSION: u32 = 1;
const TIMETAG_FORMAT: &str = "qdcascade-timetags";
const HISTOGRAM_FORMAT: &str = "qdcascade-histogram";
const TIMETAG_COLUMNS: &str = "detector_id,timestamp_ps";
pub const TABLE_FORMAT: &str = "qdcascade-table";
const HISTOGRAM_COLUMNS: &str = "bin_start_ps,count";
const BINARY_MAGIC: &[u8; 4] = b"QDTT";

/// Whether out-of-order time tags are sorted or rejected on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortPolicy {
    #[default]
    Reject,
    Sort,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format(format!("{}:{line}: {}", path.display(), message.into()))
}

fn timetag_header(s: &TimeTagStream) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# format={TIMETAG_FORMAT}");
    let _ = writeln!(h, "# version={FORMAT_VERSION}");
    let _ = writeln!(h, "# duration_ps={}", s.duration_ps);
    let _ = writeln!(h, "# count={}", s.len());
    for (k, v) in &s.metadata {
        let _ = writeln!(h, "# meta.{k}={v}");
    }
    h
}

/// Parsed `# key=value` lines.
struct Header {
    fields: BTreeMap<String, String>,
    meta: BTreeMap<String, String>,
}

impl Header {
    fn parse_line(&mut self, line: &str) -> Option<()> {
        let body = line.strip_prefix('#')?.trim();
        let (k, v) = body.split_once('=')?;
        match k.strip_prefix("meta.") {
            Some(m) => self.meta.insert(m.to_string(), v.to_string()),
            None => self.fields.insert(k.to_string(), v.to_string()),
        };
        Some(())
    }

    fn check(&self, path: &Path, format: &str) -> Result<()> {
        if self.fields.get("format").map(String::as_str) != Some(format) {
            return Err(parse_err(path, 1, format!("not a {format} file")));
        }
        match self.fields.get("version").and_then(|v| v.parse::<u32>().ok()) {
            Some(v) if v <= FORMAT_VERSION => Ok(()),
            Some(v) => Err(parse_err(path, 2, format!("unsupported version {v}"))),
            None => Err(parse_err(path, 2, "missing version")),
        }
    }

    fn get<T: std::str::FromStr>(&self, path: &Path, key: &str) -> Result<T> {
        let v = self.fields.get(key).ok_or_else(|| parse_err(path, 0, format!("missing header field `{key}`")))?;
        v.parse().map_err(|_| parse_err(path, 0, format!("bad value for `{key}`: {v:?}")))
    }
}

/// Reads header lines, then feeds each data row (with its 1-based line
/// number) to `row`.
fn read_text(path: &Path, columns: &str, mut row: impl FnMut(usize, &str) -> Result<()>) -> Result<Header> {
    let reader = BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut header = Header { fields: BTreeMap::new(), meta: BTreeMap::new() };
    let mut in_header = true;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if in_header {
            if line.starts_with('#') {
                header.parse_line(&line).ok_or_else(|| parse_err(path, n, "malformed header line"))?;
                continue;
            }
            if line.trim() != columns {
                return Err(parse_err(path, n, format!("expected column header `{columns}`")));
            }
            in_header = false;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        row(n, &line)?;
    }
    if in_header {
        return Err(parse_err(path, 0, format!("missing column header `{columns}`")));
    }
    Ok(header)
}

fn two_fields<'a>(path: &Path, n: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = line.split(',');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a.trim(), b.trim())),
        _ => Err(parse_err(path, n, format!("expected 2 fields, got {line:?}"))),
    }
}

pub fn write_timetags(s: &TimeTagStream, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_all(timetag_header(s).as_bytes())?;
    writeln!(w, "{TIMETAG_COLUMNS}")?;
    for t in &s.tags {
        writeln!(w, "{},{}", t.detector_id, t.timestamp)?;
    }
    w.flush()?;
    Ok(())
}

fn finish_stream(path: &Path, header: Header, tags: Vec<TimeTag>, sort: SortPolicy) -> Result<TimeTagStream> {
    let duration: i64 = header.get(path, "duration_ps")?;
    if let Ok(count) = header.get::<usize>(path, "count") {
        if count != tags.len() {
            return Err(parse_err(path, 0, format!("header count {count} but {} records", tags.len())));
        }
    }
    let mut s = TimeTagStream::new(tags, duration);
    s.metadata = header.meta;
    if !s.is_sorted() {
        match sort {
            SortPolicy::Sort => s.sort(),
            SortPolicy::Reject => return Err(parse_err(path, 0, "time tags are not sorted by timestamp")),
        }
    }
    Ok(s)
}

pub fn read_timetags(path: &Path, sort: SortPolicy) -> Result<TimeTagStream> {
    let mut tags = Vec::new();
    let mut last: Option<(i64, usize)> = None;
    let mut first_unsorted = None;
    let header = read_text(path, TIMETAG_COLUMNS, |n, line| {
        let (a, b) = two_fields(path, n, line)?;
        let id = a.parse::<u32>().map_err(|_| parse_err(path, n, format!("bad detector id {a:?}")))?;
        let ts = b.parse::<i64>().map_err(|_| parse_err(path, n, format!("bad timestamp {b:?}")))?;
        if let Some((prev, _)) = last {
            if ts < prev && first_unsorted.is_none() {
                first_unsorted = Some(n);
            }
        }
        last = Some((ts, n));
        tags.push(TimeTag::new(id, ts));
        Ok(())
    })?;
    header.check(path, TIMETAG_FORMAT)?;
    if let (Some(n), SortPolicy::Reject) = (first_unsorted, sort) {
        return Err(parse_err(path, n, "timestamp earlier than the previous row (unsorted input)"));
    }
    finish_stream(path, header, tags, sort)
}

pub fn write_timetags_binary(s: &TimeTagStream, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let header = timetag_header(s);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    for t in &s.tags {
        w.write_all(&t.detector_id.to_le_bytes())?;
        w.write_all(&t.timestamp.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timetags_binary(path: &Path, sort: SortPolicy) -> Result<TimeTagStream> {
    let mut r = BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated file"))?;
    if &magic != BINARY_MAGIC {
        return Err(bad("not a binary time-tag file"));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u32b).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(u32b);
    if version > FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    r.read_exact(&mut u32b).map_err(|_| bad("truncated header length"))?;
    let mut text = vec![0u8; u32::from_le_bytes(u32b) as usize];
    r.read_exact(&mut text).map_err(|_| bad("truncated header"))?;
    let text = String::from_utf8(text).map_err(|_| bad("header is not UTF-8"))?;
    let mut header = Header { fields: BTreeMap::new(), meta: BTreeMap::new() };
    for (i, line) in text.lines().enumerate() {
        header.parse_line(line).ok_or_else(|| parse_err(path, i + 1, "malformed header line"))?;
    }
    header.check(path, TIMETAG_FORMAT)?;
    r.read_exact(&mut u64b).map_err(|_| bad("truncated record count"))?;
    let n = u64::from_le_bytes(u64b) as usize;
    let mut tags = Vec::with_capacity(n.min(1 << 24));
    for k in 0..n {
        r.read_exact(&mut u32b).map_err(|_| bad(&format!("truncated record {k}")))?;
        r.read_exact(&mut u64b).map_err(|_| bad(&format!("truncated record {k}")))?;
        tags.push(TimeTag::new(u32::from_le_bytes(u32b), i64::from_le_bytes(u64b)));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes after the last record"));
    }
    finish_stream(path, header, tags, sort)
}

pub fn write_histogram(h: &CoincidenceHistogram, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(w, "# format={HISTOGRAM_FORMAT}")?;
    writeln!(w, "# version={FORMAT_VERSION}")?;
    writeln!(w, "# bin_width_ps={}", h.bin_width_ps)?;
    writeln!(w, "# origin_ps={}", h.origin_ps)?;
    writeln!(w, "# integration_time_s={:?}", h.integration_time_s)?;
    writeln!(w, "# singles_rate_a={:?}", h.singles_rates.0)?;
    writeln!(w, "# singles_rate_b={:?}", h.singles_rates.1)?;
    writeln!(w, "# period_ps={}", h.period_ps)?;
    writeln!(w, "{HISTOGRAM_COLUMNS}")?;
    for (j, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{c}", h.bin_start(j))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram(path: &Path) -> Result<CoincidenceHistogram> {
    let mut rows: Vec<(usize, i64, u64)> = Vec::new();
    let header = read_text(path, HISTOGRAM_COLUMNS, |n, line| {
        let (a, b) = two_fields(path, n, line)?;
        let start = a.parse::<i64>().map_err(|_| parse_err(path, n, format!("bad bin start {a:?}")))?;
        let count = b.parse::<u64>().map_err(|_| parse_err(path, n, format!("bad count {b:?}")))?;
        rows.push((n, start, count));
        Ok(())
    })?;
    header.check(path, HISTOGRAM_FORMAT)?;
    let bw: i64 = header.get(path, "bin_width_ps")?;
    let origin: i64 = header.get(path, "origin_ps")?;
    let mut h = CoincidenceHistogram::new(bw, origin, Vec::with_capacity(rows.len()))?;
    for (j, &(n, start, count)) in rows.iter().enumerate() {
        if start != h.bin_start(j) {
            return Err(parse_err(path, n, format!("bin start {start}, expected {}", h.bin_start(j))));
        }
        h.counts.push(count);
    }
    h.integration_time_s = header.get(path, "integration_time_s")?;
    h.singles_rates = (header.get(path, "singles_rate_a")?, header.get(path, "singles_rate_b")?);
    h.period_ps = header.get(path, "period_ps")?;
    Ok(h)
}

/// Writes a CSV table: version header, column names, then rows.
pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(w, "# format={TABLE_FORMAT}")?;
    writeln!(w, "# version={FORMAT_VERSION}")?;
    writeln!(w, "{}", columns.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
