//! Sort metrics as a stable JSON document.

use serde::{Deserialize, Serialize};

use crate::merge::{MergePassStats, PatternKind};
use crate::run_generation::RunGenMode;
use crate::selectors::SelectorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Consuming,
    Generating,
    Merging,
    Emitting,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Consuming => "consume",
            Phase::Generating => "run generation",
            Phase::Merging => "merge",
            Phase::Emitting => "emit",
            Phase::Done => "done",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunGenerationMetrics {
    pub mode: RunGenMode,
    pub runs: u64,
    pub records: u64,
    pub comparisons: u64,
    pub spill_bytes: u64,
    pub peak_memory_bytes: u64,
    pub mean_run_records: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeMetrics {
    /// `None` when there was nothing to merge.
    pub pattern: Option<PatternKind>,
    pub passes: u32,
    pub comparisons: u64,
    pub records_moved: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub peak_spill_bytes: u64,
    pub wall_time_secs: f64,
    pub pass_stats: Vec<MergePassStats>,
}

impl MergeMetrics {
    pub(crate) fn absorb(&mut self, passes: &[MergePassStats]) {
        self.passes = passes.len() as u32;
        self.comparisons = passes.iter().map(|p| p.comparisons).sum();
        self.records_moved = passes.iter().map(|p| p.records_moved).sum();
        self.bytes_read = passes.iter().map(|p| p.bytes_read).sum();
        self.bytes_written = passes.iter().map(|p| p.bytes_written).sum();
        self.pass_stats = passes.to_vec();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitMetrics {
    pub blocks: u64,
    pub records: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub memory_budget_bytes: u64,
    pub tape_count: usize,
    pub selector: SelectorKind,
    pub run_generation: RunGenMode,
    pub block_size: usize,
    pub read_buffer_bytes: usize,
    pub write_buffer_bytes: usize,
    pub expected_runs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    /// False until merging has finished.
    pub complete: bool,
    pub phase: Phase,
    pub selector: SelectorKind,
    pub run_generation: RunGenerationMetrics,
    pub merge: MergeMetrics,
    pub emit: EmitMetrics,
    pub config: ConfigEcho,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
