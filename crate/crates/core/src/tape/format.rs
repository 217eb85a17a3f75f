//! Run stream encoding (little-endian throughout):
//!
//! ```text
//! file    := run*
//! run     := record* trailer
//! record  := u32 payload_len, payload
//! payload := per column: int64 | float64 (8 bytes), date (4 bytes), string (u32 len + bytes)
//! trailer := u32 0xFFFFFFFF, u64 record_count
//! ```

use std::io::{self, Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::record::{ColumnType, Record, Schema, Value, MAX_PAYLOAD_BYTES, RECORD_HEADER_BYTES};

pub const TRAILER_SENTINEL: u32 = 0xFFFF_FFFF;
pub const TRAILER_BYTES: usize = 12;

/// Appends the framed encoding of `record` to `buf`.
pub fn encode_record(record: &Record, buf: &mut Vec<u8>) -> Result<()> {
    let payload = record.payload_len();
    if payload > MAX_PAYLOAD_BYTES {
        return Err(Error::Usage(format!(
            "record payload of {payload} bytes exceeds the frame limit"
        )));
    }
    buf.reserve(record.byte_size());
    buf.extend_from_slice(&(payload as u32).to_le_bytes());
    for v in record.values() {
        match v {
            Value::Int64(x) => buf.extend_from_slice(&x.to_le_bytes()),
            Value::Float64(x) => buf.extend_from_slice(&x.to_bits().to_le_bytes()),
            Value::Date(x) => buf.extend_from_slice(&x.to_le_bytes()),
            Value::String(s) => {
                buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
                buf.extend_from_slice(s.as_bytes());
            }
        }
    }
    Ok(())
}

pub fn encode_trailer(count: u64, buf: &mut Vec<u8>) {
    buf.extend_from_slice(&TRAILER_SENTINEL.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
}

/// Decodes one payload (without its length prefix).
pub fn decode_payload(schema: &Schema, mut bytes: &[u8]) -> std::result::Result<Record, String> {
    let mut values = Vec::with_capacity(schema.columns().len());
    for col in schema.columns() {
        let v = match col.ty {
            ColumnType::Int64 => Value::Int64(i64::from_le_bytes(take::<8>(&mut bytes, &col.name)?)),
            ColumnType::Float64 => Value::Float64(f64::from_bits(u64::from_le_bytes(take::<8>(
                &mut bytes, &col.name,
            )?))),
            ColumnType::Date => Value::Date(i32::from_le_bytes(take::<4>(&mut bytes, &col.name)?)),
            ColumnType::String => {
                let len = u32::from_le_bytes(take::<4>(&mut bytes, &col.name)?) as usize;
                if bytes.len() < len {
                    return Err(format!("string in column `{}` overruns the payload", col.name));
                }
                let (s, rest) = bytes.split_at(len);
                bytes = rest;
                let s = std::str::from_utf8(s)
                    .map_err(|_| format!("column `{}` is not valid UTF-8", col.name))?;
                Value::String(s.to_owned())
            }
        };
        values.push(v);
    }
    if !bytes.is_empty() {
        return Err(format!("{} trailing payload bytes", bytes.len()));
    }
    Ok(Record::new(values))
}

fn take<const N: usize>(bytes: &mut &[u8], column: &str) -> std::result::Result<[u8; N], String> {
    if bytes.len() < N {
        return Err(format!("payload truncated in column `{column}`"));
    }
    let (head, rest) = bytes.split_at(N);
    *bytes = rest;
    Ok(head.try_into().unwrap())
}

/// Streaming writer for `run*` files.
pub struct RunEncoder<W: Write> {
    inner: W,
    buf: Vec<u8>,
    run_records: u64,
    run_open: bool,
    bytes_written: u64,
    runs: u64,
}

impl<W: Write> RunEncoder<W> {
    pub fn new(inner: W) -> Self {
        RunEncoder {
            inner,
            buf: Vec::with_capacity(256),
            run_records: 0,
            run_open: false,
            bytes_written: 0,
            runs: 0,
        }
    }

    pub fn begin_run(&mut self) -> Result<()> {
        if self.run_open {
            return Err(Error::Usage("begin_run while a run is still open".into()));
        }
        self.run_open = true;
        self.run_records = 0;
        Ok(())
    }

    /// Returns the number of bytes written for this record.
    pub fn append(&mut self, record: &Record) -> Result<usize> {
        if !self.run_open {
            return Err(Error::Usage("append outside of a run".into()));
        }
        self.buf.clear();
        encode_record(record, &mut self.buf)?;
        self.inner.write_all(&self.buf)?;
        self.run_records += 1;
        self.bytes_written += self.buf.len() as u64;
        Ok(self.buf.len())
    }

    /// Writes the trailer and returns the record count of the closed run.
    pub fn end_run(&mut self) -> Result<u64> {
        if !self.run_open {
            return Err(Error::Usage("end_run without begin_run".into()));
        }
        self.buf.clear();
        encode_trailer(self.run_records, &mut self.buf);
        self.inner.write_all(&self.buf)?;
        self.bytes_written += TRAILER_BYTES as u64;
        self.run_open = false;
        self.runs += 1;
        Ok(self.run_records)
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written
    }

    pub fn run_records(&self) -> u64 {
        self.run_records
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn run_open(&self) -> bool {
        self.run_open
    }

    pub fn get_mut(&mut self) -> &mut W {
        &mut self.inner
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// One decoded element of a run stream.
#[derive(Debug, PartialEq)]
pub enum Frame<T> {
    Record(T),
    EndOfRun { records: u64 },
    EndOfStream,
}

/// Streaming reader for `run*` data. Verifies trailer counts and reports the
/// byte offset of any malformed frame.
pub struct RunDecoder<R: Read> {
    inner: R,
    schema: Option<Arc<Schema>>,
    source_name: String,
    offset: u64,
    run_records: u64,
    buf: Vec<u8>,
}

impl<R: Read> RunDecoder<R> {
    pub fn new(inner: R, schema: Arc<Schema>, source_name: impl Into<String>) -> Self {
        RunDecoder {
            inner,
            schema: Some(schema),
            source_name: source_name.into(),
            offset: 0,
            run_records: 0,
            buf: Vec::new(),
        }
    }

    /// Reader that only walks frames; records come back as payload lengths.
    pub fn frames_only(inner: R, source_name: impl Into<String>) -> Self {
        RunDecoder {
            inner,
            schema: None,
            source_name: source_name.into(),
            offset: 0,
            run_records: 0,
            buf: Vec::new(),
        }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn corrupt(&self, offset: u64, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            source_name: self.source_name.clone(),
            offset,
            reason: reason.into(),
        }
    }

    /// Reads up to `out.len()` bytes; returns how many were available before EOF.
    fn fill(&mut self, out_len: usize) -> Result<usize> {
        self.buf.resize(out_len, 0);
        let mut got = 0;
        while got < out_len {
            match self.inner.read(&mut self.buf[got..out_len]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(got)
    }

    fn next_raw(&mut self) -> Result<Frame<usize>> {
        let start = self.offset;
        let got = self.fill(4)?;
        if got == 0 {
            if self.run_records > 0 {
                return Err(self.corrupt(start, "run is missing its trailer"));
            }
            return Ok(Frame::EndOfStream);
        }
        if got < 4 {
            return Err(self.corrupt(start, "truncated frame header"));
        }
        let len = u32::from_le_bytes(self.buf[..4].try_into().unwrap());
        self.offset += 4;
        if len == TRAILER_SENTINEL {
            if self.fill(8)? < 8 {
                return Err(self.corrupt(start, "truncated run trailer"));
            }
            let count = u64::from_le_bytes(self.buf[..8].try_into().unwrap());
            self.offset += 8;
            if count != self.run_records {
                return Err(self.corrupt(
                    start,
                    format!("trailer claims {count} records, run holds {}", self.run_records),
                ));
            }
            self.run_records = 0;
            return Ok(Frame::EndOfRun { records: count });
        }
        let len = len as usize;
        if self.fill(len)? < len {
            return Err(self.corrupt(start, format!("record payload of {len} bytes is truncated")));
        }
        self.offset += len as u64;
        self.run_records += 1;
        Ok(Frame::Record(len))
    }

    /// Next frame with the record payload decoded against the schema.
    pub fn next_frame(&mut self) -> Result<Frame<Record>> {
        let start = self.offset;
        match self.next_raw()? {
            Frame::Record(len) => {
                let schema = self
                    .schema
                    .as_ref()
                    .ok_or_else(|| Error::Usage("decoder was opened without a schema".into()))?;
                decode_payload(schema, &self.buf[..len])
                    .map(Frame::Record)
                    .map_err(|reason| self.corrupt(start, reason))
            }
            Frame::EndOfRun { records } => Ok(Frame::EndOfRun { records }),
            Frame::EndOfStream => Ok(Frame::EndOfStream),
        }
    }

    /// Next frame without decoding; records report their framed size in bytes.
    pub fn next_frame_len(&mut self) -> Result<Frame<usize>> {
        Ok(match self.next_raw()? {
            Frame::Record(len) => Frame::Record(len + RECORD_HEADER_BYTES),
            other => other,
        })
    }
}

/// Summary of one run found by [`scan_runs`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RunInfo {
    pub index: usize,
    pub offset: u64,
    pub records: u64,
    pub bytes: u64,
}

/// Walks the frames of a `run*` stream and lists its runs.
pub fn scan_runs<R: Read>(reader: R, source_name: &str) -> Result<Vec<RunInfo>> {
    let mut dec = RunDecoder::frames_only(reader, source_name);
    let mut runs = Vec::new();
    let mut start = 0u64;
    loop {
        match dec.next_frame_len()? {
            Frame::Record(_) => {}
            Frame::EndOfRun { records } => {
                runs.push(RunInfo {
                    index: runs.len(),
                    offset: start,
                    records,
                    bytes: dec.offset() - start,
                });
                start = dec.offset();
            }
            Frame::EndOfStream => return Ok(runs),
        }
    }
}
