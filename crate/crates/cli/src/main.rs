use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tapesort::bench::{self, BenchInput, BenchPlan};
use tapesort::datagen::{self, CsvOptions, TableSpec};
use tapesort::files::{self, NativeReader, RecordSource};
use tapesort::operator::DEFAULT_BLOCK_SIZE;
use tapesort::tape::format::scan_runs;
use tapesort::tape::{IoConfig, DEFAULT_IO_BUFFER_BYTES};
use tapesort::{Error, ExternalSort, MetricsReport, Record, Result, RunGenMode, Schema, SelectorKind, SortConfig};

#[derive(Parser)]
#[command(name = "tapesort", version, about = "External merge sort with polyphase tapes and pluggable merge selectors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic table in the native format
    Gen(GenArgs),
    /// Sort a native or CSV file
    Sort(SortArgs),
    /// Time repeated sorts under each selector
    Bench(BenchArgs),
    /// Show the runs of a native or spill file, or summarize a metrics document
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "lineorder-like")]
    preset: String,
    #[arg(long, default_value_t = 1_000_000)]
    rows: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the preset's sort key (`col[:asc|desc],...`)
    #[arg(long)]
    key: Option<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Auto,
    Native,
    Csv,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input format; `auto` picks native when a schema sidecar exists
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    /// Column layout for CSV input, e.g. `id:int64,name:string,day:date`
    #[arg(long)]
    schema: Option<String>,
    /// Sort key (`col[:asc|desc],...`, names or indices); defaults to the file's key
    #[arg(long)]
    key: Option<String>,
    /// CSV input has a header line
    #[arg(long)]
    header: bool,
    /// Skip malformed CSV rows instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Memory budget, e.g. 64M or 1G
    #[arg(long, default_value = "64M", value_parser = parse_size)]
    memory: u64,
    /// Solve the memory budget so run generation makes about this many runs
    #[arg(long)]
    target_runs: Option<u64>,
    #[arg(long, default_value_t = 8)]
    tapes: usize,
    #[arg(long, value_enum, default_value_t = RunGen::QuicksortFill)]
    run_gen: RunGen,
    /// Records per output block
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    #[arg(long, default_value = "256K", value_parser = parse_size)]
    read_buffer: u64,
    #[arg(long, default_value = "256K", value_parser = parse_size)]
    write_buffer: u64,
    /// Directory for spill files
    #[arg(long, env = "TAPESORT_SPILL_DIR")]
    spill_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunGen {
    QuicksortFill,
    ReplacementSelection,
}

impl From<RunGen> for RunGenMode {
    fn from(r: RunGen) -> Self {
        match r {
            RunGen::QuicksortFill => RunGenMode::QuicksortFill,
            RunGen::ReplacementSelection => RunGenMode::ReplacementSelection,
        }
    }
}

#[derive(Args)]
struct SortArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    input_args: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "loser-tree")]
    selector: SelectorKind,
    /// Write the sorted output as CSV instead of the native format
    #[arg(long)]
    csv_output: bool,
    /// Metrics document path (default: `<output>.metrics.json`; `-` for stdout)
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Native or CSV input; without it a preset table is generated
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "lineorder-like")]
    preset: String,
    /// Preset rows; the default is about 1 GB of lineorder-like data
    #[arg(long, default_value_t = 10_000_000)]
    rows: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    input_args: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "naive,heap,loser-tree")]
    selectors: Vec<SelectorKind>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
    /// Print JSON instead of text
    #[arg(long)]
    json: bool,
}

fn parse_size(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let (digits, mult) = match s.char_indices().find(|(_, c)| !c.is_ascii_digit()) {
        None => (s, 1u64),
        Some((i, _)) => {
            let mult = match s[i..].to_ascii_uppercase().trim_end_matches(['B', 'I']) {
                "" => 1,
                "K" => 1 << 10,
                "M" => 1 << 20,
                "G" => 1 << 30,
                "T" => 1 << 40,
                other => return Err(format!("unknown size suffix `{other}`")),
            };
            (&s[..i], mult)
        }
    };
    let n: u64 = digits.parse().map_err(|_| format!("`{s}` is not a size"))?;
    n.checked_mul(mult).ok_or_else(|| format!("`{s}` is too large"))
}

impl EngineArgs {
    fn io(&self) -> IoConfig {
        IoConfig {
            read_buffer_bytes: self.read_buffer as usize,
            write_buffer_bytes: self.write_buffer as usize,
            spill_directory: self.spill_dir.clone().unwrap_or_else(std::env::temp_dir),
        }
    }
}

/// Resolved sort input.
struct Input {
    schema: Arc<Schema>,
    kind: InputKind,
}

enum InputKind {
    Native(PathBuf),
    Csv(PathBuf, CsvOptions),
}

impl Input {
    fn resolve(path: &Path, args: &InputArgs) -> Result<Input> {
        let native = match args.format {
            Format::Native => true,
            Format::Csv => false,
            Format::Auto => files::sidecar_path(path).exists() || args.schema.is_none(),
        };
        let (schema, kind) = if native {
            (files::read_schema(path)?, InputKind::Native(path.to_path_buf()))
        } else {
            let spec = args
                .schema
                .as_deref()
                .ok_or_else(|| Error::Usage("CSV input needs --schema".into()))?;
            let columns = Schema::parse_columns(spec)?;
            let keys = match &args.key {
                Some(k) => Schema::parse_keys(&columns, k)?,
                None => vec![tapesort::SortKey::asc(0)],
            };
            let opts = CsvOptions {
                has_header: args.header,
                strict: !args.lenient,
            };
            (Schema::new(columns, keys)?, InputKind::Csv(path.to_path_buf(), opts))
        };
        let schema = match &args.key {
            Some(k) => {
                let keys = Schema::parse_keys(schema.columns(), k)?;
                schema.with_keys(keys)?
            }
            None => schema,
        };
        Ok(Input {
            schema: Arc::new(schema),
            kind,
        })
    }

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<Record>> + Send>> {
        Ok(match &self.kind {
            InputKind::Native(p) => Box::new(NativeReader::with_schema(p, self.schema.clone())?),
            InputKind::Csv(p, opts) => Box::new(datagen::ingest_csv(p, &self.schema, *opts)?),
        })
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut spec = TableSpec::preset(&a.preset, a.rows, a.seed)?;
    let mut schema = spec.schema()?;
    if let Some(k) = &a.key {
        spec.keys = Schema::parse_keys(schema.columns(), k)?;
        schema = spec.schema()?;
    }
    let (n, bytes) = files::write_native(&a.output, &schema, datagen::generate(&spec)?.map(Ok))?;
    println!("wrote {n} records ({bytes} bytes) to {}", a.output.display());
    Ok(())
}

fn cmd_sort(a: SortArgs) -> Result<()> {
    let input = Input::resolve(&a.input, &a.input_args)?;
    let budget = match a.engine.target_runs {
        Some(0) => return Err(Error::Config("--target-runs must be positive".into())),
        Some(n) => bench::budget_for_runs(&bench::measure(input.records()?)?, n),
        None => a.engine.memory,
    };
    let cfg = SortConfig {
        memory_budget_bytes: budget,
        tape_count: a.engine.tapes,
        selector: a.selector,
        run_generation: a.engine.run_gen.into(),
        block_size: a.engine.block_size,
        io: a.engine.io(),
        expected_runs: a.engine.target_runs,
    };
    let source = RecordSource::new(input.schema.clone(), input.records()?, cfg.block_size);
    let mut op = ExternalSort::open(cfg, Box::new(source))?;
    let report = write_output(&mut op, &a.output, &input.schema, a.csv_output);
    op.close();
    let report = report?;
    if !a.csv_output {
        files::write_schema(&a.output, &input.schema)?;
    }
    let metrics_json = report.to_json();
    match a.metrics.as_deref() {
        Some(p) if p == Path::new("-") => println!("{metrics_json}"),
        other => {
            let p = other.map(Path::to_path_buf).unwrap_or_else(|| {
                let mut s = a.output.as_os_str().to_owned();
                s.push(".metrics.json");
                PathBuf::from(s)
            });
            std::fs::write(&p, metrics_json + "\n").map_err(|e| Error::Spill { path: p.clone(), source: e })?;
        }
    }
    eprintln!(
        "sorted {} records: {} runs, {} merge passes, {} merge comparisons ({})",
        report.emit.records,
        report.run_generation.runs,
        report.merge.passes,
        report.merge.comparisons,
        report.selector
    );
    Ok(())
}

fn write_output(op: &mut ExternalSort, path: &Path, schema: &Schema, csv: bool) -> Result<MetricsReport> {
    let io_err = |e: std::io::Error| Error::Spill {
        path: path.to_path_buf(),
        source: e,
    };
    if csv {
        let mut w = BufWriter::with_capacity(DEFAULT_IO_BUFFER_BYTES, File::create(path).map_err(io_err)?);
        while let Some(block) = op.next()? {
            for r in &block.records {
                let fields: Vec<String> = r.values().iter().map(ToString::to_string).collect();
                writeln!(w, "{}", fields.join(",")).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
    } else {
        let mut failure = None;
        let records = std::iter::from_fn(|| {
            if failure.is_some() {
                return None;
            }
            match op.next() {
                Ok(Some(block)) => Some(block.records),
                Ok(None) => None,
                Err(e) => {
                    failure = Some(e);
                    None
                }
            }
        })
        .flatten()
        .map(Ok);
        let written = files::write_native(path, schema, records);
        if let Some(e) = failure {
            return Err(e);
        }
        written?;
    }
    Ok(op.metrics())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let input = match &a.input {
        None => BenchInput::Preset {
            name: a.preset.clone(),
            rows: a.rows,
            seed: a.seed,
        },
        Some(p) => match Input::resolve(p, &a.input_args)? {
            Input {
                kind: InputKind::Native(p),
                ..
            } => BenchInput::Native(p),
            Input {
                kind: InputKind::Csv(p, opts),
                schema,
            } => BenchInput::Csv {
                path: p,
                schema: (*schema).clone(),
                opts,
            },
        },
    };
    let keys = match &a.input_args.key {
        Some(k) if matches!(input, BenchInput::Preset { .. }) => {
            let schema = TableSpec::preset(&a.preset, 0, 0)?.schema()?;
            Some(Schema::parse_keys(schema.columns(), k)?)
        }
        Some(_) => None,
        None => None,
    };
    let plan = BenchPlan {
        input,
        keys,
        memory_budget_bytes: a.engine.memory,
        target_runs: a.engine.target_runs,
        tape_count: a.engine.tapes,
        selectors: a.selectors.clone(),
        repetitions: a.repetitions,
        run_generation: a.engine.run_gen.into(),
        block_size: a.engine.block_size,
        io: a.engine.io(),
    };
    let report = bench::run_bench(&plan)?;
    print!("{}", report.table());
    if let Some(p) = &a.json {
        std::fs::write(p, report.to_json() + "\n").map_err(|e| Error::Spill {
            path: p.clone(),
            source: e,
        })?;
    }
    if !report.complete {
        return Err(Error::Usage(report.error.unwrap_or_else(|| "bench incomplete".into())));
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let text = |e: std::io::Error| Error::Spill {
        path: a.file.clone(),
        source: e,
    };
    if a.file.extension().is_some_and(|e| e == "json") {
        let doc = std::fs::read_to_string(&a.file).map_err(text)?;
        let m: MetricsReport = serde_json::from_str(&doc).map_err(|e| Error::Schema(format!("not a metrics document: {e}")))?;
        if a.json {
            println!("{}", m.to_json());
            return Ok(());
        }
        println!("complete: {}  selector: {}", m.complete, m.selector);
        println!(
            "run generation: {:?}, {} runs, {} records, {} comparisons, {:.3}s",
            m.run_generation.mode,
            m.run_generation.runs,
            m.run_generation.records,
            m.run_generation.comparisons,
            m.run_generation.wall_time_secs
        );
        println!(
            "merge: {:?}, {} passes, {} comparisons, {} bytes read, {} written, {:.3}s",
            m.merge.pattern, m.merge.passes, m.merge.comparisons, m.merge.bytes_read, m.merge.bytes_written, m.merge.wall_time_secs
        );
        for p in &m.merge.pass_stats {
            println!(
                "  pass {}: {} runs + {} dummies -> {} runs, {} records, {} comparisons",
                p.pass, p.runs_consumed, p.dummies_consumed, p.runs_produced, p.records_moved, p.comparisons
            );
        }
        println!("emit: {} blocks, {} records", m.emit.blocks, m.emit.records);
        return Ok(());
    }
    let file = File::open(&a.file).map_err(text)?;
    let runs = scan_runs(std::io::BufReader::new(file), &a.file.display().to_string())?;
    let schema = files::read_schema(&a.file).ok();
    if a.json {
        let doc = serde_json::json!({ "file": a.file, "schema": schema, "runs": runs });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        return Ok(());
    }
    if let Some(s) = &schema {
        let cols: Vec<String> = s.columns().iter().map(|c| format!("{}:{}", c.name, c.ty.name())).collect();
        println!("schema: {}", cols.join(","));
    }
    println!("{} run(s), {} records", runs.len(), runs.iter().map(|r| r.records).sum::<u64>());
    println!("{:>6}  {:>14}  {:>12}  {:>14}", "run", "offset", "records", "bytes");
    for r in &runs {
        println!("{:>6}  {:>14}  {:>12}  {:>14}", r.index, r.offset, r.records, r.bytes);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Sort(a) => cmd_sort(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tapesort: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
