//! Minimum selection among the heads of the runs being merged.
//!
//! All three structures break key ties by the lower run index, so for the
//! same input they emit the same records in the same order.

mod heap;
mod loser_tree;
mod naive;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::KeyOrder;

pub use heap::HeapSelector;
pub use loser_tree::LoserTreeSelector;
pub use naive::NaiveSelector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Naive,
    Heap,
    LoserTree,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 3] = [SelectorKind::Naive, SelectorKind::Heap, SelectorKind::LoserTree];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Naive => "naive",
            SelectorKind::Heap => "heap",
            SelectorKind::LoserTree => "loser-tree",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SelectorKind::Naive),
            "heap" | "binary-heap" => Ok(SelectorKind::Heap),
            "loser-tree" | "loser" => Ok(SelectorKind::LoserTree),
            other => Err(Error::Config(format!(
                "unknown selector `{other}` (expected naive, heap or loser-tree)"
            ))),
        }
    }
}

/// Common interface of the merge selectors.
///
/// Heads are indexed by run. `None` marks an exhausted run. The caller asks
/// for the winning run, fetches that run's next record and hands it to
/// [`RunSelector::pop_and_replace`], which returns the previous minimum.
pub trait RunSelector<T> {
    /// Number of runs the selector was built over.
    fn k(&self) -> usize;

    /// Runs that still have a head.
    fn live(&self) -> usize;

    /// Run holding the current minimum, or `None` when every run is exhausted.
    fn winner(&mut self) -> Option<usize>;

    fn head(&self, run: usize) -> Option<&T>;

    /// Removes the current minimum and installs `next` as the new head of the
    /// same run (`None` exhausts it).
    fn pop_and_replace(&mut self, next: Option<T>) -> Result<T>;

    /// Comparisons performed since construction.
    fn comparisons(&self) -> u64;
}

/// Builds a boxed selector of the requested kind.
pub fn build<'o, T: 'o, O: KeyOrder<T> + 'o>(
    kind: SelectorKind,
    heads: Vec<Option<T>>,
    order: O,
) -> Result<Box<dyn RunSelector<T> + 'o>> {
    Ok(match kind {
        SelectorKind::Naive => Box::new(NaiveSelector::new(heads, order)?),
        SelectorKind::Heap => Box::new(HeapSelector::new(heads, order)?),
        SelectorKind::LoserTree => Box::new(LoserTreeSelector::new(heads, order)?),
    })
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("a selector needs at least one run".into()));
    }
    Ok(())
}

fn exhausted_error() -> Error {
    Error::Usage("pop_and_replace on a fully exhausted selector".into())
}

/// `(key, run index)` order: true when run `a`'s head precedes run `b`'s.
#[inline]
fn precedes<T, O: KeyOrder<T>>(order: &O, a: &T, ai: usize, b: &T, bi: usize) -> bool {
    match order.compare(a, b) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => ai < bi,
    }
}
