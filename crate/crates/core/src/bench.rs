//! Repeated sorts of one input under several selectors, with timing statistics.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datagen::{self, CsvOptions, TableSpec};
use crate::error::{Error, Result};
use crate::files::{self, NativeReader, RecordSource};
use crate::merge::PatternKind;
use crate::metrics::MetricsReport;
use crate::operator::{ExternalSort, SortConfig};
use crate::record::{extract_key_size, Schema, SortKey};
use crate::run_generation::RunGenMode;
use crate::selectors::SelectorKind;
use crate::tape::IoConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum BenchInput {
    Preset { name: String, rows: u64, seed: u64 },
    Native(PathBuf),
    Csv { path: PathBuf, schema: Schema, opts: CsvOptions },
}

impl BenchInput {
    fn describe(&self) -> String {
        match self {
            BenchInput::Preset { name, rows, seed } => format!("{name} rows={rows} seed={seed}"),
            BenchInput::Native(p) => p.display().to_string(),
            BenchInput::Csv { path, .. } => format!("csv {}", path.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub input: BenchInput,
    /// Replaces the input's sort keys.
    pub keys: Option<Vec<SortKey>>,
    pub memory_budget_bytes: u64,
    /// When set, the budget is solved from the input size to produce this many runs.
    pub target_runs: Option<u64>,
    pub tape_count: usize,
    pub selectors: Vec<SelectorKind>,
    pub repetitions: usize,
    pub run_generation: RunGenMode,
    pub block_size: usize,
    pub io: IoConfig,
}

impl BenchPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.selectors.is_empty() {
            return Err(Error::Config("at least one selector is required".into()));
        }
        if self.target_runs == Some(0) {
            return Err(Error::Config("target run count must be positive".into()));
        }
        Ok(())
    }
}

/// Accounted size of an input, as run generation will see it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InputSize {
    pub rows: u64,
    pub bytes: u64,
    pub accounted_bytes: u64,
    pub max_record_accounted: u64,
}

pub fn measure<I: Iterator<Item = Result<crate::record::Record>>>(records: I) -> Result<InputSize> {
    let mut s = InputSize::default();
    for r in records {
        let r = r?;
        let acc = extract_key_size(&r) as u64;
        s.rows += 1;
        s.bytes += r.byte_size() as u64;
        s.accounted_bytes += acc;
        s.max_record_accounted = s.max_record_accounted.max(acc);
    }
    Ok(s)
}

/// Budget for about `runs` quicksort-fill runs: `ceil(accounted / runs)` plus one record of slack.
pub fn budget_for_runs(size: &InputSize, runs: u64) -> u64 {
    size.accounted_bytes.div_ceil(runs.max(1)) + size.max_record_accounted
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub stddev: Option<f64>,
    /// Student-t 95% half-width; `None` for a single observation.
    pub ci95_half_width: Option<f64>,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
    if n < 2 {
        return Summary {
            n,
            mean,
            stddev: None,
            ci95_half_width: None,
        };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Summary {
        n,
        mean,
        stddev: Some(sd),
        ci95_half_width: Some(t * sd / (n as f64).sqrt()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectorResult {
    pub selector: SelectorKind,
    pub wall_times_secs: Vec<f64>,
    pub wall_time: Summary,
    pub merge_wall_time: Summary,
    pub merge_comparisons: u64,
    pub runs: u64,
    pub passes: u32,
    pub pattern: Option<PatternKind>,
    pub records: u64,
    /// Hash of the sorted output; equal across selectors on the same input.
    pub output_hash: u64,
    pub last_metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub input: String,
    pub input_size: InputSize,
    pub memory_budget_bytes: u64,
    pub target_runs: Option<u64>,
    pub tape_count: usize,
    pub repetitions: usize,
    pub run_generation: RunGenMode,
    pub results: Vec<SelectorResult>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    /// False when a repetition failed; `error` then says why.
    pub complete: bool,
    pub error: Option<String>,
}

impl BenchReport {
    pub fn result(&self, kind: SelectorKind) -> Option<&SelectorResult> {
        self.results.iter().find(|r| r.selector == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }

    pub fn table(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let mut rows = vec![[
            "selector".to_string(),
            "reps".into(),
            "mean s".into(),
            "sd s".into(),
            "ci95 s".into(),
            "merge s".into(),
            "merge cmps".into(),
            "runs".into(),
            "passes".into(),
        ]];
        for r in &self.results {
            rows.push([
                r.selector.to_string(),
                r.wall_time.n.to_string(),
                format!("{:.4}", r.wall_time.mean),
                fmt_opt(r.wall_time.stddev),
                fmt_opt(r.wall_time.ci95_half_width),
                format!("{:.4}", r.merge_wall_time.mean),
                r.merge_comparisons.to_string(),
                r.runs.to_string(),
                r.passes.to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            if i == 0 {
                writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
            }
        }
        for n in &self.notes {
            writeln!(out, "note: {n}").unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        if let Some(e) = &self.error {
            writeln!(out, "error: {e}").unwrap();
        }
        out
    }
}

/// Native copy of the bench input plus its schema.
struct Prepared {
    _dir: Option<tempfile::TempDir>,
    path: PathBuf,
    schema: Arc<Schema>,
}

fn prepare(plan: &BenchPlan) -> Result<Prepared> {
    let staging = || {
        tempfile::Builder::new()
            .prefix("tapesort-bench-")
            .tempdir_in(&plan.io.spill_directory)
            .map_err(|e| Error::spill(&plan.io.spill_directory, e))
    };
    let (dir, path, schema) = match &plan.input {
        BenchInput::Native(p) => (None, p.clone(), files::read_schema(p)?),
        BenchInput::Preset { name, rows, seed } => {
            let spec = TableSpec::preset(name, *rows, *seed)?;
            let schema = spec.schema()?;
            let dir = staging()?;
            let path = dir.path().join("input.rec");
            files::write_native(&path, &schema, datagen::generate(&spec)?.map(Ok))?;
            (Some(dir), path, schema)
        }
        BenchInput::Csv { path, schema, opts } => {
            let dir = staging()?;
            let out = dir.path().join("input.rec");
            files::write_native(&out, schema, datagen::ingest_csv(path, schema, *opts)?)?;
            (Some(dir), out, schema.clone())
        }
    };
    let schema = match &plan.keys {
        Some(keys) => schema.with_keys(keys.clone())?,
        None => schema,
    };
    Ok(Prepared {
        _dir: dir,
        path,
        schema: Arc::new(schema),
    })
}

/// Outcome of one full sort of a native file.
pub struct SortRun {
    pub wall_time_secs: f64,
    pub records: u64,
    pub output_hash: u64,
    pub metrics: MetricsReport,
}

/// Sorts a native file, draining and hashing the output. Checks that the output is ordered.
pub fn sort_file(path: &std::path::Path, schema: Arc<Schema>, cfg: SortConfig) -> Result<SortRun> {
    let started = Instant::now();
    let reader = NativeReader::with_schema(path, schema.clone())?;
    let source = RecordSource::new(schema.clone(), reader, cfg.block_size);
    let mut op = ExternalSort::open(cfg, Box::new(source))?;
    let mut hasher = DefaultHasher::new();
    let mut records = 0u64;
    let mut last = None;
    while let Some(block) = op.next()? {
        for r in block.records {
            if let Some(prev) = &last {
                if schema.key_order(prev, &r) == std::cmp::Ordering::Greater {
                    return Err(Error::Corrupt {
                        source_name: "sort output".into(),
                        offset: 0,
                        reason: format!("record {records} is out of key order"),
                    });
                }
            }
            r.hash(&mut hasher);
            records += 1;
            last = Some(r);
        }
    }
    let metrics = op.metrics();
    op.close();
    Ok(SortRun {
        wall_time_secs: started.elapsed().as_secs_f64(),
        records,
        output_hash: hasher.finish(),
        metrics,
    })
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport> {
    plan.validate()?;
    plan.io.validate()?;
    let prepared = prepare(plan)?;
    let size = measure(NativeReader::with_schema(&prepared.path, prepared.schema.clone())?)?;
    let budget = match plan.target_runs {
        Some(n) => budget_for_runs(&size, n),
        None => plan.memory_budget_bytes,
    };
    let mut report = BenchReport {
        input: plan.input.describe(),
        input_size: size,
        memory_budget_bytes: budget,
        target_runs: plan.target_runs,
        tape_count: plan.tape_count,
        repetitions: plan.repetitions,
        run_generation: plan.run_generation,
        results: Vec::new(),
        warnings: Vec::new(),
        notes: vec![format!(
            "desk-scale protocol: {} repetition(s) over {:.1} MiB; absolute times are machine-dependent",
            plan.repetitions,
            size.bytes as f64 / (1 << 20) as f64
        )],
        complete: true,
        error: None,
    };
    if plan.target_runs.is_some() && plan.run_generation == RunGenMode::ReplacementSelection {
        report
            .notes
            .push("the target run count is solved for quicksort fill; replacement selection makes fewer, longer runs".into());
    }
    'outer: for &kind in &plan.selectors {
        let cfg = SortConfig {
            memory_budget_bytes: budget,
            tape_count: plan.tape_count,
            selector: kind,
            run_generation: plan.run_generation,
            block_size: plan.block_size,
            io: plan.io.clone(),
            expected_runs: plan.target_runs,
        };
        let mut times = Vec::new();
        let mut merge_times = Vec::new();
        let mut result: Option<SelectorResult> = None;
        for rep in 0..plan.repetitions {
            let run = match sort_file(&prepared.path, prepared.schema.clone(), cfg.clone()) {
                Ok(r) => r,
                Err(e) => {
                    report.complete = false;
                    report.error = Some(format!("{kind} repetition {}: {e}", rep + 1));
                    break 'outer;
                }
            };
            log::info!("{kind} repetition {}: {:.3}s", rep + 1, run.wall_time_secs);
            times.push(run.wall_time_secs);
            merge_times.push(run.metrics.merge.wall_time_secs);
            let m = &run.metrics;
            match &mut result {
                None => {
                    result = Some(SelectorResult {
                        selector: kind,
                        wall_times_secs: vec![],
                        wall_time: summarize(&[]),
                        merge_wall_time: summarize(&[]),
                        merge_comparisons: m.merge.comparisons,
                        runs: m.run_generation.runs,
                        passes: m.merge.passes,
                        pattern: m.merge.pattern,
                        records: run.records,
                        output_hash: run.output_hash,
                        last_metrics: None,
                    })
                }
                Some(r) => {
                    if r.merge_comparisons != m.merge.comparisons || r.output_hash != run.output_hash {
                        report
                            .warnings
                            .push(format!("{kind}: repetition {} was not deterministic", rep + 1));
                    }
                }
            }
            result.as_mut().unwrap().last_metrics = Some(run.metrics);
        }
        let mut r = result.unwrap();
        r.wall_time = summarize(&times);
        r.merge_wall_time = summarize(&merge_times);
        r.wall_times_secs = times;
        report.results.push(r);
    }
    check_orderings(&mut report);
    Ok(report)
}

fn check_orderings(report: &mut BenchReport) {
    let get = |k| report.result(k).map(|r: &SelectorResult| (r.wall_time.mean, r.merge_comparisons, r.output_hash));
    let (Some(naive), Some(heap), Some(loser)) = (
        get(SelectorKind::Naive),
        get(SelectorKind::Heap),
        get(SelectorKind::LoserTree),
    ) else {
        return;
    };
    let mut warnings = Vec::new();
    if !(naive.2 == heap.2 && heap.2 == loser.2) {
        warnings.push("selectors produced different outputs".to_string());
    }
    if !(loser.1 < heap.1 && heap.1 < naive.1) {
        warnings.push(format!(
            "merge comparisons not ordered loser-tree < heap < naive: {} / {} / {}",
            loser.1, heap.1, naive.1
        ));
    }
    if !(loser.0 <= heap.0 && heap.0 <= naive.0) {
        warnings.push(format!(
            "wall times not ordered loser-tree <= heap <= naive: {:.4}s / {:.4}s / {:.4}s (comparisons {} / {} / {})",
            loser.0, heap.0, naive.0, loser.1, heap.1, naive.1
        ));
    }
    report.warnings.extend(warnings);
}
