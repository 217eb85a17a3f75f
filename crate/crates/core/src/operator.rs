//! The external sort operator: pulls record blocks from a child, sorts them
//! through runs on tapes and hands back sorted blocks.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use crate::error::{Error, Result};
use crate::merge::{merge_all, TapeSet};
use crate::metrics::{ConfigEcho, EmitMetrics, MergeMetrics, MetricsReport, Phase, RunGenerationMetrics};
use crate::record::{Record, RecordBlock, Schema, SortKeyComparator};
use crate::run_generation::{generate_runs, MemoryBudget, RunGenMode};
use crate::selectors::SelectorKind;
use crate::tape::{IoConfig, SpillMeter};

pub const DEFAULT_BLOCK_SIZE: usize = 4096;
pub const DEFAULT_TAPE_COUNT: usize = 8;
pub const DEFAULT_MEMORY_BUDGET: u64 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortConfig {
    pub memory_budget_bytes: u64,
    pub tape_count: usize,
    pub selector: SelectorKind,
    pub run_generation: RunGenMode,
    /// Records per output block.
    pub block_size: usize,
    pub io: IoConfig,
    /// Expected run count; only reported, distribution adapts online.
    pub expected_runs: Option<u64>,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig {
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
            tape_count: DEFAULT_TAPE_COUNT,
            selector: SelectorKind::LoserTree,
            run_generation: RunGenMode::QuicksortFill,
            block_size: DEFAULT_BLOCK_SIZE,
            io: IoConfig::default(),
            expected_runs: None,
        }
    }
}

impl SortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_budget_bytes == 0 {
            return Err(Error::Config("memory budget must be positive".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        if self.tape_count < 2 {
            return Err(Error::Config(format!(
                "at least 2 tapes are required, got {}",
                self.tape_count
            )));
        }
        self.io.validate()
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            memory_budget_bytes: self.memory_budget_bytes,
            tape_count: self.tape_count,
            selector: self.selector,
            run_generation: self.run_generation,
            block_size: self.block_size,
            read_buffer_bytes: self.io.read_buffer_bytes,
            write_buffer_bytes: self.io.write_buffer_bytes,
            expected_runs: self.expected_runs,
        }
    }
}

/// Child operator interface: blocks of records sharing one schema.
pub trait BlockSource {
    fn next_block(&mut self) -> Result<Option<RecordBlock>>;
}

/// Adapts any iterator of blocks.
pub struct IterSource<I>(pub I);

impl<I: Iterator<Item = Result<RecordBlock>>> BlockSource for IterSource<I> {
    fn next_block(&mut self) -> Result<Option<RecordBlock>> {
        self.0.next().transpose()
    }
}

/// Source over blocks already in memory.
pub fn vec_source(blocks: Vec<RecordBlock>) -> Box<dyn BlockSource + Send> {
    Box::new(IterSource(blocks.into_iter().map(Ok)))
}

/// Flattens child blocks into records, checking every block against the first schema.
struct BlockRecords<'a> {
    child: &'a mut (dyn BlockSource + Send),
    schema: Arc<Schema>,
    current: std::vec::IntoIter<Record>,
    done: bool,
}

impl Iterator for BlockRecords<'_> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Result<Record>> {
        loop {
            if let Some(r) = self.current.next() {
                return Some(self.schema.check(&r).map(|_| r));
            }
            if self.done {
                return None;
            }
            match self.child.next_block() {
                Ok(Some(block)) => {
                    if !Arc::ptr_eq(&block.schema, &self.schema) && *block.schema != *self.schema {
                        self.done = true;
                        return Some(Err(Error::Schema(
                            "child block schema differs from the first block".into(),
                        )));
                    }
                    self.current = block.records.into_iter();
                }
                Ok(None) => self.done = true,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

pub struct ExternalSort {
    cfg: SortConfig,
    child: Option<Box<dyn BlockSource + Send>>,
    phase: Phase,
    schema: Option<Arc<Schema>>,
    workdir: Option<TempDir>,
    set: Option<TapeSet>,
    final_tape: Option<usize>,
    meter: Arc<SpillMeter>,
    report: MetricsReport,
    order_check: bool,
}

impl ExternalSort {
    /// Validates the configuration; no input is read and no file is created yet.
    pub fn open(cfg: SortConfig, child: Box<dyn BlockSource + Send>) -> Result<Self> {
        cfg.validate()?;
        let report = MetricsReport {
            complete: false,
            phase: Phase::Consuming,
            selector: cfg.selector,
            run_generation: RunGenerationMetrics {
                mode: cfg.run_generation,
                ..Default::default()
            },
            merge: MergeMetrics::default(),
            emit: EmitMetrics::default(),
            config: cfg.echo(),
        };
        Ok(ExternalSort {
            cfg,
            child: Some(child),
            phase: Phase::Consuming,
            schema: None,
            workdir: None,
            set: None,
            final_tape: None,
            meter: SpillMeter::new(),
            report,
            order_check: cfg!(debug_assertions),
        })
    }

    /// Toggles the debug-build check that every spilled run is sorted.
    pub fn set_order_check(&mut self, on: bool) {
        self.order_check = on;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn schema(&self) -> Option<&Arc<Schema>> {
        self.schema.as_ref()
    }

    pub fn spill_meter(&self) -> &Arc<SpillMeter> {
        &self.meter
    }

    /// Next sorted block, or `None` at end of stream. The first call consumes
    /// the whole input.
    pub fn next(&mut self) -> Result<Option<RecordBlock>> {
        loop {
            match self.phase {
                Phase::Consuming | Phase::Generating => {
                    self.generate().map_err(|e| e.in_phase(Phase::Generating.name()))?
                }
                Phase::Merging => self.merge().map_err(|e| e.in_phase(Phase::Merging.name()))?,
                Phase::Emitting => {
                    return self.emit().map_err(|e| e.in_phase(Phase::Emitting.name()));
                }
                Phase::Done => return Ok(None),
            }
        }
    }

    fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
        self.report.phase = phase;
    }

    fn generate(&mut self) -> Result<()> {
        let started = Instant::now();
        self.set_phase(Phase::Generating);
        let mut child = self
            .child
            .take()
            .ok_or_else(|| Error::Usage("operator is closed".into()))?;
        let first = match child.next_block()? {
            Some(b) => b,
            None => {
                self.report.run_generation.wall_time_secs = started.elapsed().as_secs_f64();
                self.report.complete = true;
                self.set_phase(Phase::Done);
                return Ok(());
            }
        };
        let schema = first.schema.clone();
        self.schema = Some(schema.clone());

        let dir = tempfile::Builder::new()
            .prefix("tapesort-")
            .tempdir_in(&self.cfg.io.spill_directory)
            .map_err(|e| Error::spill(&self.cfg.io.spill_directory, e))?;
        let io = IoConfig {
            spill_directory: dir.path().to_path_buf(),
            ..self.cfg.io.clone()
        };
        self.workdir = Some(dir);
        let mut set = TapeSet::new(self.cfg.tape_count, schema.clone(), io, self.meter.clone())?;
        set.set_order_check(self.order_check);

        let cmp = SortKeyComparator::new(schema.clone());
        let input = BlockRecords {
            child: child.as_mut(),
            schema,
            current: first.records.into_iter(),
            done: false,
        };
        let budget = MemoryBudget::new(self.cfg.memory_budget_bytes)?;
        let result = generate_runs(input, self.cfg.run_generation, budget, &cmp, &mut set);
        self.set = Some(set);
        let stats = result?;

        let rg = &mut self.report.run_generation;
        rg.runs = stats.runs;
        rg.records = stats.records;
        rg.comparisons = stats.comparisons;
        rg.peak_memory_bytes = stats.peak_memory_bytes;
        rg.mean_run_records = if stats.runs == 0 {
            0.0
        } else {
            stats.records as f64 / stats.runs as f64
        };
        rg.spill_bytes = self.meter.live();
        rg.wall_time_secs = started.elapsed().as_secs_f64();
        if let Some(expected) = self.cfg.expected_runs {
            if stats.runs != expected {
                log::info!("expected {expected} runs, generated {}", stats.runs);
            }
        }
        self.set_phase(Phase::Merging);
        Ok(())
    }

    fn merge(&mut self) -> Result<()> {
        let started = Instant::now();
        let set = self
            .set
            .as_mut()
            .ok_or_else(|| Error::Usage("operator is closed".into()))?;
        let cmp = SortKeyComparator::new(self.schema.clone().unwrap());
        self.report.merge.pattern = set.plan().kind();
        let outcome = merge_all(set, self.cfg.selector, &cmp)?;
        self.final_tape = outcome.final_tape;
        if let Some(i) = self.final_tape {
            set.tape_mut(i).unwrap().next_run()?;
        }
        self.report.merge.absorb(&outcome.passes);
        self.report.merge.peak_spill_bytes = self.meter.peak();
        self.report.merge.wall_time_secs = started.elapsed().as_secs_f64();
        self.report.complete = true;
        self.set_phase(Phase::Emitting);
        Ok(())
    }

    fn emit(&mut self) -> Result<Option<RecordBlock>> {
        let started = Instant::now();
        let (Some(i), Some(set)) = (self.final_tape, self.set.as_mut()) else {
            self.set_phase(Phase::Done);
            return Ok(None);
        };
        let tape = set.tape_mut(i).unwrap();
        let mut records = Vec::with_capacity(self.cfg.block_size.min(1 << 16));
        while records.len() < self.cfg.block_size {
            match tape.take_head()? {
                Some(r) => records.push(r),
                None => break,
            }
        }
        let emit = &mut self.report.emit;
        emit.wall_time_secs += started.elapsed().as_secs_f64();
        if records.is_empty() {
            self.set_phase(Phase::Done);
            self.cleanup();
            return Ok(None);
        }
        emit.blocks += 1;
        emit.records += records.len() as u64;
        Ok(Some(RecordBlock::new(self.schema.clone().unwrap(), records)))
    }

    /// Metrics so far; `complete` is false until merging has finished.
    pub fn metrics(&self) -> MetricsReport {
        let mut r = self.report.clone();
        r.merge.peak_spill_bytes = self.meter.peak();
        r
    }

    /// Deletes all spill files. Safe to call more than once.
    pub fn close(&mut self) {
        self.child = None;
        self.cleanup();
        if self.phase != Phase::Done {
            self.set_phase(Phase::Done);
        }
    }

    fn cleanup(&mut self) {
        if let Some(mut set) = self.set.take() {
            set.delete_files();
        }
        if let Some(dir) = self.workdir.take() {
            let path = dir.path().to_path_buf();
            if let Err(e) = dir.close() {
                log::warn!("could not remove spill directory {}: {e}", path.display());
            }
        }
    }
}

impl Drop for ExternalSort {
    fn drop(&mut self) {
        self.cleanup();
    }
}

/// Sorts everything from `child` and collects the output.
pub fn sort_all(cfg: SortConfig, child: Box<dyn BlockSource + Send>) -> Result<(Vec<Record>, MetricsReport)> {
    let mut op = ExternalSort::open(cfg, child)?;
    let mut out = Vec::new();
    while let Some(block) = op.next()? {
        out.extend(block.records);
    }
    let report = op.metrics();
    op.close();
    Ok((out, report))
}
