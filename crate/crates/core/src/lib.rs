//! External merge sort over file-backed tapes.
//!
//! Records are split into sorted runs under a memory budget, distributed over
//! `T` tapes in a polyphase pattern and merged with a pluggable run selector
//! (naive scan, binary heap or loser tree).

pub mod bench;
pub mod datagen;
pub mod error;
pub mod files;
pub mod merge;
pub mod metrics;
pub mod operator;
pub mod record;
pub mod run_generation;
pub mod selectors;
pub mod tape;

pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use operator::{sort_all, BlockSource, ExternalSort, SortConfig};
pub use record::{Column, ColumnType, Record, RecordBlock, Schema, SortKey, SortKeyComparator, Value};
pub use run_generation::RunGenMode;
pub use selectors::SelectorKind;
