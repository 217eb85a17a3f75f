//! Run merging over a set of abstract tapes.

mod plan;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Record, Schema, SortKeyComparator};
use crate::run_generation::RunSink;
use crate::selectors::{HeapSelector, LoserTreeSelector, NaiveSelector, RunSelector, SelectorKind};
use crate::tape::{IoConfig, SpillMeter, Tape, TapeMode, MIN_IO_BUFFER_BYTES};

pub use plan::{plan_distribution, Distributor, MergePlan, PatternKind, PolyphasePlan};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergePassStats {
    pub pass: u32,
    /// Real runs read.
    pub runs_consumed: u64,
    pub dummies_consumed: u64,
    /// Runs written, including zero-length ones that stand in for all-dummy merges.
    pub runs_produced: u64,
    pub records_moved: u64,
    pub comparisons: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub wall_time_secs: f64,
}

/// `T` tapes fed by an online polyphase distributor. Tapes are opened on first use.
pub struct TapeSet {
    schema: Arc<Schema>,
    io: IoConfig,
    meter: Arc<SpillMeter>,
    tapes: Vec<Option<Tape>>,
    dummies: Vec<u64>,
    dist: Distributor,
    current: Option<usize>,
    order_check: bool,
}

impl TapeSet {
    pub fn new(tape_count: usize, schema: Arc<Schema>, io: IoConfig, meter: Arc<SpillMeter>) -> Result<Self> {
        io.validate()?;
        let dist = Distributor::new(tape_count)?;
        Ok(TapeSet {
            schema,
            io,
            meter,
            tapes: (0..tape_count).map(|_| None).collect(),
            dummies: vec![0; tape_count],
            dist,
            current: None,
            order_check: cfg!(debug_assertions),
        })
    }

    pub fn set_order_check(&mut self, on: bool) {
        self.order_check = on;
        for t in self.tapes.iter_mut().flatten() {
            t.set_order_check(on);
        }
    }

    pub fn tape_count(&self) -> usize {
        self.tapes.len()
    }

    pub fn plan(&self) -> MergePlan {
        self.dist.plan()
    }

    pub fn runs(&self) -> u64 {
        self.dist.runs_placed()
    }

    pub fn tape(&self, i: usize) -> Option<&Tape> {
        self.tapes.get(i).and_then(Option::as_ref)
    }

    pub fn tape_mut(&mut self, i: usize) -> Option<&mut Tape> {
        self.tapes.get_mut(i).and_then(Option::as_mut)
    }

    /// Real plus dummy runs per tape.
    pub fn logical_runs(&self) -> Vec<u64> {
        (0..self.tapes.len())
            .map(|i| self.dummies[i] + self.physical_runs(i))
            .collect()
    }

    fn physical_runs(&self, i: usize) -> u64 {
        match &self.tapes[i] {
            None => 0,
            Some(t) if t.mode() == TapeMode::Writing => t.run_count() as u64,
            Some(t) => t.runs_remaining() as u64,
        }
    }

    fn open_tape(&mut self, i: usize) -> Result<&mut Tape> {
        if self.tapes[i].is_none() {
            let mut t = Tape::open(i as u32, self.schema.clone(), &self.io)?.with_meter(self.meter.clone());
            t.set_order_check(self.order_check);
            self.tapes[i] = Some(t);
        }
        Ok(self.tapes[i].as_mut().unwrap())
    }

    fn writing(&mut self) -> Result<&mut Tape> {
        let i = self
            .current
            .ok_or_else(|| Error::Usage("no run is open on the tape set".into()))?;
        Ok(self.tapes[i].as_mut().unwrap())
    }

    /// Deletes every spill file still owned by the set.
    pub fn delete_files(&mut self) {
        for t in self.tapes.iter_mut().flatten() {
            t.delete_files();
        }
    }
}

impl RunSink for TapeSet {
    fn begin_run(&mut self) -> Result<()> {
        if self.current.is_some() {
            return Err(Error::Usage("begin_run before the previous run was ended".into()));
        }
        let j = self.dist.next_tape()?;
        self.open_tape(j)?.begin_run()?;
        self.current = Some(j);
        Ok(())
    }

    fn append(&mut self, record: &Record) -> Result<()> {
        self.writing()?.append(record)
    }

    fn end_run(&mut self) -> Result<()> {
        self.writing()?.end_run()?;
        self.current = None;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergeOutcome {
    /// Tape holding the single sorted run; `None` when there were no runs.
    pub final_tape: Option<usize>,
    pub passes: Vec<MergePassStats>,
}

/// Merges until one run remains and leaves it rewound on `final_tape`.
pub fn merge_all(set: &mut TapeSet, kind: SelectorKind, cmp: &SortKeyComparator) -> Result<MergeOutcome> {
    if set.current.is_some() {
        return Err(Error::Usage("merge started with a run still open".into()));
    }
    let t = set.tapes.len();
    let d = set.dist.dummies();
    set.dummies[..t - 1].copy_from_slice(&d[..t - 1]);
    set.dummies[t - 1] = 0;
    for tape in set.tapes.iter_mut().flatten() {
        if tape.mode() == TapeMode::Writing {
            tape.rewind()?;
        }
    }
    let mut outcome = MergeOutcome::default();
    match set.dist.runs_placed() {
        0 => return Ok(outcome),
        1 => {
            outcome.final_tape = (0..t).find(|&i| set.physical_runs(i) == 1);
            return Ok(outcome);
        }
        _ => {}
    }

    let mut out = set.dist.output_tape();
    set.open_tape(out)?;
    let mut pass = 0u32;
    while set.logical_runs().iter().sum::<u64>() > 1 {
        pass += 1;
        let stats = merge_pass(set, out, pass, kind, cmp).map_err(|e| pass_error(e, pass))?;
        outcome.passes.push(stats);
        set.tapes[out].as_mut().unwrap().rewind()?;
        if set.logical_runs().iter().sum::<u64>() <= 1 {
            outcome.final_tape = Some(out);
            break;
        }
        // the input that ran dry becomes the next output
        let emptied = (0..t)
            .find(|&i| i != out && set.logical_runs()[i] == 0)
            .ok_or_else(|| Error::Usage("polyphase pass left no empty tape".into()))?;
        let next = set.open_tape(emptied)?;
        if next.mode() == TapeMode::Reading {
            next.reset_for_writing()?;
        }
        out = emptied;
    }
    Ok(outcome)
}

fn pass_error(e: Error, pass: u32) -> Error {
    match e {
        Error::Corrupt { source_name, offset, reason } => Error::Corrupt {
            source_name: format!("{source_name} (merge pass {pass})"),
            offset,
            reason,
        },
        other => other,
    }
}

/// One polyphase pass: merges as many times as the shortest input allows.
pub fn merge_pass(
    set: &mut TapeSet,
    out: usize,
    pass: u32,
    kind: SelectorKind,
    cmp: &SortKeyComparator,
) -> Result<MergePassStats> {
    let started = Instant::now();
    let t = set.tapes.len();
    let inputs: Vec<usize> = (0..t).filter(|&i| i != out).collect();
    let counts = set.logical_runs();
    let steps = inputs.iter().map(|&i| counts[i]).min().unwrap_or(0);
    let read_before: u64 = set.tapes.iter().flatten().map(Tape::bytes_read).sum();
    let written_before = set.tapes[out].as_ref().map_or(0, Tape::bytes_written);
    let mut stats = MergePassStats {
        pass,
        ..Default::default()
    };
    for _ in 0..steps {
        merge_step(set, &inputs, out, kind, cmp, &mut stats)?;
    }
    let read_after: u64 = set.tapes.iter().flatten().map(Tape::bytes_read).sum();
    stats.bytes_read = read_after - read_before;
    stats.bytes_written = set.tapes[out].as_ref().map_or(0, Tape::bytes_written) - written_before;
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(stats)
}

fn merge_step(
    set: &mut TapeSet,
    inputs: &[usize],
    out: usize,
    kind: SelectorKind,
    cmp: &SortKeyComparator,
    stats: &mut MergePassStats,
) -> Result<()> {
    let mut live = Vec::new();
    for &i in inputs {
        if set.dummies[i] > 0 {
            set.dummies[i] -= 1;
            stats.dummies_consumed += 1;
        } else {
            live.push(i);
        }
    }
    if live.is_empty() {
        set.dummies[out] += 1;
        stats.runs_produced += 1;
        return Ok(());
    }
    let per_input = (set.io.read_buffer_bytes / live.len()).max(MIN_IO_BUFFER_BYTES);
    let mut heads = Vec::with_capacity(live.len());
    for &i in &live {
        let tape = set.tapes[i]
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("tape {i} has no runs to merge")))?;
        tape.set_read_buffer(per_input);
        if !tape.next_run()? {
            return Err(Error::Usage(format!("tape {i} ran out of runs mid-pass")));
        }
        heads.push(tape.take_head()?);
    }
    stats.runs_consumed += live.len() as u64;

    let mut tapes: Vec<Option<Tape>> = std::mem::take(&mut set.tapes);
    let result = {
        let (ins, output) = split_tapes(&mut tapes, &live, out);
        output.begin_run()?;
        let r = match kind {
            SelectorKind::Naive => drive(NaiveSelector::new(heads, cmp)?, ins, output),
            SelectorKind::Heap => drive(HeapSelector::new(heads, cmp)?, ins, output),
            SelectorKind::LoserTree => drive(LoserTreeSelector::new(heads, cmp)?, ins, output),
        };
        r.and_then(|(moved, comparisons)| {
            output.end_run()?;
            Ok((moved, comparisons))
        })
    };
    set.tapes = tapes;
    let (moved, comparisons) = result?;
    stats.records_moved += moved;
    stats.comparisons += comparisons;
    stats.runs_produced += 1;
    for &i in &live {
        set.tapes[i].as_mut().unwrap().release_consumed()?;
    }
    Ok(())
}

/// Mutable borrows of the live inputs (in `live` order) and the output tape.
fn split_tapes<'a>(tapes: &'a mut [Option<Tape>], live: &[usize], out: usize) -> (Vec<&'a mut Tape>, &'a mut Tape) {
    let mut ins: Vec<(usize, &'a mut Tape)> = Vec::with_capacity(live.len());
    let mut output = None;
    for (i, slot) in tapes.iter_mut().enumerate() {
        if i == out {
            output = slot.as_mut();
        } else if let Some(pos) = live.iter().position(|&l| l == i) {
            ins.push((pos, slot.as_mut().unwrap()));
        }
    }
    ins.sort_by_key(|(pos, _)| *pos);
    (ins.into_iter().map(|(_, t)| t).collect(), output.unwrap())
}

fn drive<S: RunSelector<Record>>(mut sel: S, mut ins: Vec<&mut Tape>, output: &mut Tape) -> Result<(u64, u64)> {
    let mut moved = 0u64;
    while let Some(w) = sel.winner() {
        let next = ins[w].take_head()?;
        let rec = sel.pop_and_replace(next)?;
        output.append(&rec)?;
        moved += 1;
    }
    Ok((moved, sel.comparisons()))
}
