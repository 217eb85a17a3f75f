//! Abstract tapes: append-then-rewind streams of sorted runs backed by files
//! in a spill directory.
//!
//! Every run lives in its own segment file (`tape-IIII-SSSSSS.run`), so the
//! space of a consumed run can be handed back to the file system while the
//! rest of the tape is still being read. Each tape owns its read and write
//! buffers; nothing goes through a shared page cache of ours.

pub mod format;

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Record, Schema};
use format::{Frame, RunDecoder, RunEncoder, TRAILER_BYTES};

pub const DEFAULT_IO_BUFFER_BYTES: usize = 256 * 1024;
pub const MIN_IO_BUFFER_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoConfig {
    pub read_buffer_bytes: usize,
    pub write_buffer_bytes: usize,
    pub spill_directory: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            read_buffer_bytes: DEFAULT_IO_BUFFER_BYTES,
            write_buffer_bytes: DEFAULT_IO_BUFFER_BYTES,
            spill_directory: std::env::temp_dir(),
        }
    }
}

impl IoConfig {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        IoConfig {
            spill_directory: dir.into(),
            ..IoConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.read_buffer_bytes < MIN_IO_BUFFER_BYTES || self.write_buffer_bytes < MIN_IO_BUFFER_BYTES
        {
            return Err(Error::Config(format!(
                "I/O buffers must be at least {MIN_IO_BUFFER_BYTES} bytes"
            )));
        }
        Ok(())
    }
}

/// Live and peak bytes held in spill files, shared by all tapes of one sort.
#[derive(Debug, Default)]
pub struct SpillMeter {
    live: AtomicU64,
    peak: AtomicU64,
}

impl SpillMeter {
    pub fn new() -> Arc<Self> {
        Arc::new(SpillMeter::default())
    }

    fn add(&self, bytes: u64) {
        let now = self.live.fetch_add(bytes, AtomicOrdering::Relaxed) + bytes;
        self.peak.fetch_max(now, AtomicOrdering::Relaxed);
    }

    fn sub(&self, bytes: u64) {
        self.live.fetch_sub(bytes, AtomicOrdering::Relaxed);
    }

    pub fn live(&self) -> u64 {
        self.live.load(AtomicOrdering::Relaxed)
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(AtomicOrdering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapeMode {
    Writing,
    Reading,
}

#[derive(Debug)]
struct Segment {
    path: PathBuf,
    offset: u64,
    bytes: u64,
    records: u64,
    released: bool,
}

/// Write side of the run currently being appended.
struct RunWriter {
    encoder: RunEncoder<BufWriter<File>>,
    path: PathBuf,
    last: Option<Record>,
}

/// Read side: one decoded record of lookahead into the current run.
struct RunReader {
    decoder: RunDecoder<BufReader<File>>,
    segment: usize,
    head: Option<Record>,
    exhausted: bool,
}

pub struct Tape {
    id: u32,
    dir: PathBuf,
    schema: Arc<Schema>,
    read_buffer: usize,
    write_buffer: usize,
    mode: TapeMode,
    segments: Vec<Segment>,
    next_seq: u64,
    spare: Option<(PathBuf, File)>,
    writer: Option<RunWriter>,
    reader: Option<RunReader>,
    next_segment: usize,
    bytes_written: u64,
    bytes_read: u64,
    check_order: bool,
    meter: Option<Arc<SpillMeter>>,
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tape")
            .field("id", &self.id)
            .field("mode", &self.mode)
            .field("runs", &self.segments.len())
            .field("next_segment", &self.next_segment)
            .finish()
    }
}

impl Tape {
    /// Creates an empty tape in writing mode. The first backing file is created
    /// immediately; a second tape with the same id in the same directory fails.
    pub fn open(id: u32, schema: Arc<Schema>, cfg: &IoConfig) -> Result<Tape> {
        cfg.validate()?;
        let mut tape = Tape {
            id,
            dir: cfg.spill_directory.clone(),
            schema,
            read_buffer: cfg.read_buffer_bytes,
            write_buffer: cfg.write_buffer_bytes,
            mode: TapeMode::Writing,
            segments: Vec::new(),
            next_seq: 0,
            spare: None,
            writer: None,
            reader: None,
            next_segment: 0,
            bytes_written: 0,
            bytes_read: 0,
            check_order: cfg!(debug_assertions),
            meter: None,
        };
        tape.spare = Some(tape.create_segment_file()?);
        Ok(tape)
    }

    pub fn with_meter(mut self, meter: Arc<SpillMeter>) -> Self {
        self.meter = Some(meter);
        self
    }

    /// Enables or disables the per-run sortedness check (only active in debug builds).
    pub fn set_order_check(&mut self, on: bool) {
        self.check_order = on;
    }

    /// Read buffer used for runs opened from now on.
    pub fn set_read_buffer(&mut self, bytes: usize) {
        self.read_buffer = bytes.max(MIN_IO_BUFFER_BYTES);
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn mode(&self) -> TapeMode {
        self.mode
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Runs written since the tape was opened or last reset.
    pub fn run_count(&self) -> usize {
        self.segments.len()
    }

    /// Byte offset at which each run starts in the tape's logical stream.
    pub fn run_boundaries(&self) -> Vec<u64> {
        self.segments.iter().map(|s| s.offset).collect()
    }

    pub fn run_records(&self) -> Vec<u64> {
        self.segments.iter().map(|s| s.records).collect()
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    /// Bytes currently held on disk by this tape's unreleased runs.
    pub fn disk_bytes(&self) -> u64 {
        self.segments.iter().filter(|s| !s.released).map(|s| s.bytes).sum()
    }

    /// Runs not yet fully read (the current run counts while it has records left).
    pub fn runs_remaining(&self) -> usize {
        let unopened = self.segments.len() - self.next_segment;
        match &self.reader {
            Some(r) if !r.exhausted => unopened + 1,
            _ => unopened,
        }
    }

    pub fn is_run_open(&self) -> bool {
        self.writer.is_some()
    }

    fn create_segment_file(&mut self) -> Result<(PathBuf, File)> {
        let path = self
            .dir
            .join(format!("tape-{:04}-{:06}.run", self.id, self.next_seq));
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == ErrorKind::AlreadyExists {
                    Error::Usage(format!(
                        "tape {} already has files in {}",
                        self.id,
                        self.dir.display()
                    ))
                } else {
                    Error::spill(&path, e)
                }
            })?;
        self.next_seq += 1;
        Ok((path, file))
    }

    pub fn begin_run(&mut self) -> Result<()> {
        if self.mode != TapeMode::Writing {
            return Err(Error::Usage(format!("tape {} is not in writing mode", self.id)));
        }
        if self.writer.is_some() {
            return Err(Error::Usage(format!(
                "tape {}: begin_run before the previous run was ended",
                self.id
            )));
        }
        let (path, file) = match self.spare.take() {
            Some(spare) => spare,
            None => self.create_segment_file()?,
        };
        let mut encoder = RunEncoder::new(BufWriter::with_capacity(self.write_buffer, file));
        encoder.begin_run()?;
        self.writer = Some(RunWriter {
            encoder,
            path,
            last: None,
        });
        Ok(())
    }

    pub fn append(&mut self, record: &Record) -> Result<()> {
        let id = self.id;
        let check = self.check_order && cfg!(debug_assertions);
        let w = self
            .writer
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("tape {id}: append outside of a run")))?;
        if check {
            if let Some(last) = &w.last {
                if self.schema.key_order(last, record) == std::cmp::Ordering::Greater {
                    return Err(Error::UnsortedRun {
                        tape: id,
                        index: w.encoder.run_records(),
                    });
                }
            }
            w.last = Some(record.clone());
        }
        let n = w.encoder.append(record).map_err(|e| match e {
            Error::Io(io) => Error::spill(&w.path, io),
            other => other,
        })? as u64;
        self.bytes_written += n;
        if let Some(m) = &self.meter {
            m.add(n);
        }
        Ok(())
    }

    /// Closes the current run and flushes it to its file. Returns the run's record count.
    pub fn end_run(&mut self) -> Result<u64> {
        let mut w = self
            .writer
            .take()
            .ok_or_else(|| Error::Usage(format!("tape {}: end_run without begin_run", self.id)))?;
        let records = w.encoder.end_run()?;
        let bytes = w.encoder.bytes_written();
        w.encoder
            .get_mut()
            .flush()
            .map_err(|e| Error::spill(&w.path, e))?;
        drop(w.encoder);
        self.bytes_written += TRAILER_BYTES as u64;
        if let Some(m) = &self.meter {
            m.add(TRAILER_BYTES as u64);
        }
        let offset = self.segments.last().map_or(0, |s| s.offset + s.bytes);
        self.segments.push(Segment {
            path: w.path,
            offset,
            bytes,
            records,
            released: false,
        });
        self.spare = Some(self.create_segment_file()?);
        Ok(records)
    }

    /// Switches from writing to reading; runs are read back in the order written.
    pub fn rewind(&mut self) -> Result<()> {
        if self.mode != TapeMode::Writing {
            return Err(Error::Usage(format!("tape {} is already rewound", self.id)));
        }
        if self.writer.is_some() {
            return Err(Error::Usage(format!("tape {}: rewind with an open run", self.id)));
        }
        self.drop_spare();
        self.mode = TapeMode::Reading;
        self.reader = None;
        self.next_segment = self.segments.iter().take_while(|s| s.released).count();
        Ok(())
    }

    fn drop_spare(&mut self) {
        if let Some((path, file)) = self.spare.take() {
            drop(file);
            if let Err(e) = fs::remove_file(&path) {
                log::warn!("could not remove {}: {e}", path.display());
            }
        }
    }

    fn source_name(&self, segment: usize) -> String {
        format!("tape {} run {}", self.id, segment)
    }

    /// Positions the reader at the head of the next run. Returns false when the
    /// tape holds no further runs.
    pub fn next_run(&mut self) -> Result<bool> {
        if self.mode != TapeMode::Reading {
            return Err(Error::Usage(format!("tape {} has not been rewound", self.id)));
        }
        if let Some(r) = &self.reader {
            if !r.exhausted {
                return Err(Error::Usage(format!(
                    "tape {}: next_run before the current run was exhausted",
                    self.id
                )));
            }
        }
        self.reader = None;
        if self.next_segment >= self.segments.len() {
            return Ok(false);
        }
        let idx = self.next_segment;
        self.next_segment += 1;
        let seg = &self.segments[idx];
        let file = File::open(&seg.path).map_err(|e| Error::spill(&seg.path, e))?;
        let base = seg.offset;
        let name = self.source_name(idx);
        let mut decoder = RunDecoder::new(
            BufReader::with_capacity(self.read_buffer, file),
            self.schema.clone(),
            name,
        );
        let (head, exhausted) = read_head(&mut decoder, &mut self.bytes_read, base)?;
        self.reader = Some(RunReader {
            decoder,
            segment: idx,
            head,
            exhausted,
        });
        Ok(true)
    }

    /// Current run head; `None` once the run is exhausted.
    pub fn head(&self) -> Option<&Record> {
        self.reader.as_ref().and_then(|r| r.head.as_ref())
    }

    pub fn run_exhausted(&self) -> bool {
        self.reader.as_ref().is_none_or(|r| r.exhausted)
    }

    pub fn advance(&mut self) -> Result<()> {
        let id = self.id;
        let r = self
            .reader
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("tape {id}: no run is positioned")))?;
        if r.exhausted {
            return Ok(());
        }
        let base = self.segments[r.segment].offset;
        let (head, exhausted) = read_head(&mut r.decoder, &mut self.bytes_read, base)?;
        r.head = head;
        r.exhausted = exhausted;
        Ok(())
    }

    /// Moves the head record out and advances to the next one.
    pub fn take_head(&mut self) -> Result<Option<Record>> {
        let head = match self.reader.as_mut() {
            Some(r) => r.head.take(),
            None => None,
        };
        if head.is_some() {
            self.advance()?;
        }
        Ok(head)
    }

    pub fn is_fully_consumed(&self) -> bool {
        self.mode == TapeMode::Reading
            && self.next_segment == self.segments.len()
            && self.run_exhausted()
    }

    /// Deletes the files of all fully consumed runs and returns the bytes reclaimed.
    /// Deletion failures are logged and skipped.
    pub fn release_consumed(&mut self) -> Result<u64> {
        if self.mode != TapeMode::Reading {
            return Err(Error::Usage(format!(
                "tape {}: release_consumed requires reading mode",
                self.id
            )));
        }
        let mut upto = self.next_segment;
        match &self.reader {
            Some(r) if !r.exhausted => upto = r.segment,
            Some(_) => self.reader = None,
            None => {}
        }
        let mut freed = 0;
        for seg in &mut self.segments[..upto] {
            if seg.released {
                continue;
            }
            match fs::remove_file(&seg.path) {
                Ok(()) => {
                    seg.released = true;
                    freed += seg.bytes;
                    if let Some(m) = &self.meter {
                        m.sub(seg.bytes);
                    }
                }
                Err(e) => log::warn!("could not release {}: {e}", seg.path.display()),
            }
        }
        Ok(freed)
    }

    /// Reuses a fully consumed tape as an output tape.
    pub fn reset_for_writing(&mut self) -> Result<()> {
        if !self.is_fully_consumed() {
            return Err(Error::Usage(format!(
                "tape {} still holds unread runs",
                self.id
            )));
        }
        self.release_consumed()?;
        self.segments.clear();
        self.reader = None;
        self.next_segment = 0;
        self.mode = TapeMode::Writing;
        self.spare = Some(self.create_segment_file()?);
        Ok(())
    }

    /// Removes every file this tape still owns.
    pub fn delete_files(&mut self) {
        self.writer = None;
        self.reader = None;
        self.drop_spare();
        for seg in &mut self.segments {
            if !seg.released {
                if let Err(e) = fs::remove_file(&seg.path) {
                    if e.kind() != ErrorKind::NotFound {
                        log::warn!("could not remove {}: {e}", seg.path.display());
                    }
                }
                seg.released = true;
                if let Some(m) = &self.meter {
                    m.sub(seg.bytes);
                }
            }
        }
    }

    pub fn directory(&self) -> &Path {
        &self.dir
    }
}

fn read_head(
    decoder: &mut RunDecoder<BufReader<File>>,
    bytes_read: &mut u64,
    base: u64,
) -> Result<(Option<Record>, bool)> {
    let before = decoder.offset();
    let frame = decoder.next_frame().map_err(|e| match e {
        Error::Corrupt {
            source_name,
            offset,
            reason,
        } => Error::Corrupt {
            source_name,
            offset: base + offset,
            reason,
        },
        other => other,
    })?;
    *bytes_read += decoder.offset() - before;
    match frame {
        Frame::Record(r) => Ok((Some(r), false)),
        Frame::EndOfRun { .. } => Ok((None, true)),
        Frame::EndOfStream => Err(Error::Corrupt {
            source_name: "tape segment".into(),
            offset: base + decoder.offset(),
            reason: "segment ended without a run trailer".into(),
        }),
    }
}
