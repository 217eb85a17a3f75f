//! Turning an unsorted record stream into sorted runs under a memory budget.
//!
//! The default path fills the budget, sorts references to the buffered
//! records with introsort and spills them, so each record is copied once on
//! its way to disk. Replacement selection is available as an alternative.

pub mod introsort;
mod replacement;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{extract_key_size, Record, SortKeyComparator};

pub use replacement::{Emitted, ReplacementSelection, Tagged};

/// Accounted bytes against a fixed limit. Accounting covers the serialized
/// record, its bookkeeping overhead and its slot in the reference array.
#[derive(Debug, Clone)]
pub struct MemoryBudget {
    limit: u64,
    used: u64,
    peak: u64,
}

impl MemoryBudget {
    pub fn new(limit_bytes: u64) -> Result<Self> {
        if limit_bytes == 0 {
            return Err(Error::Config("memory budget must be positive".into()));
        }
        Ok(MemoryBudget {
            limit: limit_bytes,
            used: 0,
            peak: 0,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    /// Reserves `size` bytes if they fit.
    pub fn try_admit(&mut self, size: u64) -> bool {
        if self.used + size > self.limit {
            return false;
        }
        self.used += size;
        self.peak = self.peak.max(self.used);
        true
    }

    pub fn release(&mut self, size: u64) {
        debug_assert!(size <= self.used);
        self.used -= size.min(self.used);
    }

    pub fn clear(&mut self) {
        self.used = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunGenMode {
    #[default]
    QuicksortFill,
    ReplacementSelection,
}

impl std::str::FromStr for RunGenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quicksort-fill" | "quicksort_fill" | "quicksort" => Ok(RunGenMode::QuicksortFill),
            "replacement-selection" | "replacement_selection" | "replacement" => {
                Ok(RunGenMode::ReplacementSelection)
            }
            other => Err(Error::Config(format!("unknown run generation mode `{other}`"))),
        }
    }
}

/// Destination for generated runs.
pub trait RunSink {
    fn begin_run(&mut self) -> Result<()>;
    fn append(&mut self, record: &Record) -> Result<()>;
    fn end_run(&mut self) -> Result<()>;
}

/// Keeps runs in memory.
#[derive(Debug, Default)]
pub struct CollectRuns {
    pub runs: Vec<Vec<Record>>,
}

impl RunSink for CollectRuns {
    fn begin_run(&mut self) -> Result<()> {
        self.runs.push(Vec::new());
        Ok(())
    }

    fn append(&mut self, record: &Record) -> Result<()> {
        self.runs
            .last_mut()
            .ok_or_else(|| Error::Usage("append outside of a run".into()))?
            .push(record.clone());
        Ok(())
    }

    fn end_run(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerationStats {
    pub runs: u64,
    pub records: u64,
    pub comparisons: u64,
    pub peak_memory_bytes: u64,
    pub run_lengths: Vec<u64>,
}

/// Sorts record references in place; the records themselves never move.
pub fn sort_in_memory(refs: &mut [&Record], cmp: &SortKeyComparator) {
    introsort::introsort(refs, |a, b| cmp.compare(a, b));
}

/// Consumes `input` and writes sorted runs to `sink`.
pub fn generate_runs<I, S>(
    input: I,
    mode: RunGenMode,
    budget: MemoryBudget,
    cmp: &SortKeyComparator,
    sink: &mut S,
) -> Result<GenerationStats>
where
    I: Iterator<Item = Result<Record>>,
    S: RunSink + ?Sized,
{
    let before = cmp.comparisons();
    let mut stats = match mode {
        RunGenMode::QuicksortFill => fill_and_sort(input, budget, cmp, sink)?,
        RunGenMode::ReplacementSelection => replacement_runs(input, budget, cmp, sink)?,
    };
    stats.comparisons = cmp.comparisons() - before;
    stats.runs = stats.run_lengths.len() as u64;
    Ok(stats)
}

fn fill_and_sort<I, S>(
    input: I,
    mut budget: MemoryBudget,
    cmp: &SortKeyComparator,
    sink: &mut S,
) -> Result<GenerationStats>
where
    I: Iterator<Item = Result<Record>>,
    S: RunSink + ?Sized,
{
    let mut stats = GenerationStats::default();
    let mut buffer: Vec<Record> = Vec::new();
    for rec in input {
        let rec = rec?;
        let size = extract_key_size(&rec) as u64;
        if size > budget.limit() {
            return Err(Error::Unsortable {
                size,
                budget: budget.limit(),
            });
        }
        if !budget.try_admit(size) {
            flush(&mut buffer, cmp, sink, &mut stats)?;
            budget.clear();
            budget.try_admit(size);
        }
        buffer.push(rec);
    }
    if !buffer.is_empty() {
        flush(&mut buffer, cmp, sink, &mut stats)?;
    }
    stats.peak_memory_bytes = budget.peak();
    Ok(stats)
}

fn flush<S: RunSink + ?Sized>(
    buffer: &mut Vec<Record>,
    cmp: &SortKeyComparator,
    sink: &mut S,
    stats: &mut GenerationStats,
) -> Result<()> {
    let mut refs: Vec<&Record> = buffer.iter().collect();
    sort_in_memory(&mut refs, cmp);
    sink.begin_run()?;
    for r in refs {
        sink.append(r)?;
    }
    sink.end_run()?;
    stats.records += buffer.len() as u64;
    stats.run_lengths.push(buffer.len() as u64);
    buffer.clear();
    Ok(())
}

fn replacement_runs<I, S>(
    input: I,
    budget: MemoryBudget,
    cmp: &SortKeyComparator,
    sink: &mut S,
) -> Result<GenerationStats>
where
    I: Iterator<Item = Result<Record>>,
    S: RunSink + ?Sized,
{
    let mut stats = GenerationStats::default();
    let mut rs = ReplacementSelection::new(input, budget, cmp);
    let mut open = false;
    while let Some(item) = rs.next_item()? {
        if item.new_run {
            if open {
                sink.end_run()?;
            }
            sink.begin_run()?;
            stats.run_lengths.push(0);
            open = true;
        }
        sink.append(&item.record)?;
        *stats.run_lengths.last_mut().unwrap() += 1;
        stats.records += 1;
    }
    if open {
        sink.end_run()?;
    }
    stats.peak_memory_bytes = rs.budget().peak();
    Ok(stats)
}
