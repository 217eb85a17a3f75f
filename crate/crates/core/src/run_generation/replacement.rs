//! Replacement selection on top of the loser tree: each slot holds a record
//! tagged with the run it belongs to. A newly read record smaller than the
//! last output is tagged for the next run, and the current run closes once
//! the winner carries a later tag.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::record::{extract_key_size, KeyOrder, Record, SortKeyComparator};
use crate::selectors::{LoserTreeSelector, RunSelector};

use super::MemoryBudget;

#[derive(Debug)]
pub struct Tagged {
    pub epoch: u64,
    pub record: Record,
}

struct EpochOrder<'c>(&'c SortKeyComparator);

impl KeyOrder<Tagged> for EpochOrder<'_> {
    fn compare(&self, a: &Tagged, b: &Tagged) -> Ordering {
        a.epoch
            .cmp(&b.epoch)
            .then_with(|| self.0.compare(&a.record, &b.record))
    }
}

/// One output record; `new_run` is set on the first record of every run.
#[derive(Debug)]
pub struct Emitted {
    pub record: Record,
    pub new_run: bool,
}

pub struct ReplacementSelection<'c, I> {
    input: I,
    cmp: &'c SortKeyComparator,
    budget: MemoryBudget,
    tree: Option<LoserTreeSelector<Tagged, EpochOrder<'c>>>,
    pending: Option<Record>,
    epoch: u64,
    started: bool,
}

impl<'c, I> ReplacementSelection<'c, I>
where
    I: Iterator<Item = Result<Record>>,
{
    pub fn new(input: I, budget: MemoryBudget, cmp: &'c SortKeyComparator) -> Self {
        ReplacementSelection {
            input,
            cmp,
            budget,
            tree: None,
            pending: None,
            epoch: 0,
            started: false,
        }
    }

    pub fn budget(&self) -> &MemoryBudget {
        &self.budget
    }

    /// Slots in the tournament (fixed by the initial fill).
    pub fn capacity(&self) -> usize {
        self.tree.as_ref().map_or(0, |t| t.k())
    }

    fn admit(budget: &mut MemoryBudget, record: &Record) -> Result<bool> {
        let size = extract_key_size(record) as u64;
        if size > budget.limit() {
            return Err(Error::Unsortable {
                size,
                budget: budget.limit(),
            });
        }
        Ok(budget.try_admit(size))
    }

    fn fill(&mut self) -> Result<()> {
        let mut heads = Vec::new();
        for rec in self.input.by_ref() {
            let rec = rec?;
            if Self::admit(&mut self.budget, &rec)? {
                heads.push(Some(Tagged {
                    epoch: 0,
                    record: rec,
                }));
            } else {
                self.pending = Some(rec);
                break;
            }
        }
        if !heads.is_empty() {
            self.tree = Some(LoserTreeSelector::new(heads, EpochOrder(self.cmp))?);
        }
        Ok(())
    }

    pub fn next_item(&mut self) -> Result<Option<Emitted>> {
        if !self.started && self.tree.is_none() {
            self.fill()?;
        }
        let Some(tree) = self.tree.as_mut() else {
            return Ok(None);
        };
        let Some(w) = tree.winner() else {
            return Ok(None);
        };
        let head = tree.head(w).unwrap();
        let new_run = !self.started || head.epoch != self.epoch;
        self.epoch = head.epoch;
        self.started = true;
        self.budget.release(extract_key_size(&head.record) as u64);

        let incoming = match self.pending.take() {
            Some(r) => Some(r),
            None => self.input.next().transpose()?,
        };
        let next = match incoming {
            Some(rec) if Self::admit(&mut self.budget, &rec)? => {
                let epoch = if self.cmp.compare(&rec, &head.record) == Ordering::Less {
                    self.epoch + 1
                } else {
                    self.epoch
                };
                Some(Tagged { epoch, record: rec })
            }
            Some(rec) => {
                self.pending = Some(rec);
                None
            }
            None => None,
        };
        let out = tree.pop_and_replace(next)?;
        Ok(Some(Emitted {
            record: out.record,
            new_run,
        }))
    }
}
