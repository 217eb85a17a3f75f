//! Native data files: a run stream in the spill format plus a JSON schema
//! sidecar at `<file>.schema.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::BlockSource;
use crate::record::{Record, RecordBlock, Schema};
use crate::tape::format::{Frame, RunDecoder, RunEncoder};
use crate::tape::DEFAULT_IO_BUFFER_BYTES;

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".schema.json");
    PathBuf::from(s)
}

pub fn write_schema(data: &Path, schema: &Schema) -> Result<()> {
    let path = sidecar_path(data);
    let json = serde_json::to_string_pretty(schema).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::spill(&path, e))
}

pub fn read_schema(data: &Path) -> Result<Schema> {
    let path = sidecar_path(data);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::spill(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Writes records as a single run. Returns (records, bytes).
pub fn write_native<I>(data: &Path, schema: &Schema, records: I) -> Result<(u64, u64)>
where
    I: IntoIterator<Item = Result<Record>>,
{
    let file = File::create(data).map_err(|e| Error::spill(data, e))?;
    let mut enc = RunEncoder::new(BufWriter::with_capacity(DEFAULT_IO_BUFFER_BYTES, file));
    enc.begin_run()?;
    for r in records {
        let r = r?;
        schema.check(&r)?;
        enc.append(&r).map_err(|e| on_file(e, data))?;
    }
    let n = enc.end_run().map_err(|e| on_file(e, data))?;
    let bytes = enc.bytes_written();
    enc.into_inner().flush().map_err(|e| Error::spill(data, e))?;
    write_schema(data, schema)?;
    Ok((n, bytes))
}

fn on_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::spill(path, io),
        other => other,
    }
}

/// Streams every record of a native file, across run boundaries.
pub struct NativeReader {
    decoder: RunDecoder<BufReader<File>>,
    schema: Arc<Schema>,
    done: bool,
}

impl NativeReader {
    pub fn open(data: &Path) -> Result<Self> {
        let schema = Arc::new(read_schema(data)?);
        Self::with_schema(data, schema)
    }

    pub fn with_schema(data: &Path, schema: Arc<Schema>) -> Result<Self> {
        let file = File::open(data).map_err(|e| Error::spill(data, e))?;
        let decoder = RunDecoder::new(
            BufReader::with_capacity(DEFAULT_IO_BUFFER_BYTES, file),
            schema.clone(),
            data.display().to_string(),
        );
        Ok(NativeReader {
            decoder,
            schema,
            done: false,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }
}

impl Iterator for NativeReader {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Result<Record>> {
        while !self.done {
            match self.decoder.next_frame() {
                Ok(Frame::Record(r)) => return Some(Ok(r)),
                Ok(Frame::EndOfRun { .. }) => {}
                Ok(Frame::EndOfStream) => self.done = true,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        None
    }
}

/// Groups a record stream into blocks for the sort operator.
pub struct RecordSource<I> {
    schema: Arc<Schema>,
    records: I,
    block_size: usize,
}

impl<I: Iterator<Item = Result<Record>>> RecordSource<I> {
    pub fn new(schema: Arc<Schema>, records: I, block_size: usize) -> Self {
        RecordSource {
            schema,
            records,
            block_size: block_size.max(1),
        }
    }
}

impl<I: Iterator<Item = Result<Record>>> BlockSource for RecordSource<I> {
    fn next_block(&mut self) -> Result<Option<RecordBlock>> {
        let mut out = Vec::with_capacity(self.block_size.min(1 << 16));
        for r in self.records.by_ref() {
            out.push(r?);
            if out.len() == self.block_size {
                break;
            }
        }
        if out.is_empty() {
            return Ok(None);
        }
        Ok(Some(RecordBlock::new(self.schema.clone(), out)))
    }
}
