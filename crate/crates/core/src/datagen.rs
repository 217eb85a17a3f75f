//! Synthetic tables shaped like the benchmark workloads, and CSV ingestion.

use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Column, ColumnType, Record, Schema, SortKey, Value};

pub const PRESETS: [&str; 2] = ["lineorder-like", "tripdata-like"];

const HEX: &str = "0123456789ABCDEF";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnGen {
    /// Inclusive range.
    UniformInt { lo: i64, hi: i64 },
    /// Days since 1970-01-01, inclusive.
    DateRange { start: i32, end: i32 },
    Zipf { s: f64, n: u64 },
    FixedString { alphabet: String, len: usize },
    FloatRange { lo: f64, hi: f64 },
}

impl ColumnGen {
    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnGen::UniformInt { .. } | ColumnGen::Zipf { .. } => ColumnType::Int64,
            ColumnGen::DateRange { .. } => ColumnType::Date,
            ColumnGen::FixedString { .. } => ColumnType::String,
            ColumnGen::FloatRange { .. } => ColumnType::Float64,
        }
    }

    /// Serialized width of every generated value.
    pub fn width(&self) -> usize {
        match self {
            ColumnGen::UniformInt { .. } | ColumnGen::Zipf { .. } | ColumnGen::FloatRange { .. } => 8,
            ColumnGen::DateRange { .. } => 4,
            ColumnGen::FixedString { len, .. } => 4 + len,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ColumnGen::UniformInt { lo, hi } => lo <= hi,
            ColumnGen::DateRange { start, end } => start <= end,
            ColumnGen::Zipf { s, n } => *s > 0.0 && *n >= 1,
            ColumnGen::FixedString { alphabet, .. } => alphabet.is_ascii() && !alphabet.is_empty(),
            ColumnGen::FloatRange { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid column generator {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub gen: ColumnGen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub columns: Vec<ColumnSpec>,
    pub keys: Vec<SortKey>,
    pub rows: u64,
    pub seed: u64,
}

fn col(name: &str, gen: ColumnGen) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        gen,
    }
}

fn int(lo: i64, hi: i64) -> ColumnGen {
    ColumnGen::UniformInt { lo, hi }
}

fn float(lo: f64, hi: f64) -> ColumnGen {
    ColumnGen::FloatRange { lo, hi }
}

fn string(alphabet: &str, len: usize) -> ColumnGen {
    ColumnGen::FixedString {
        alphabet: alphabet.into(),
        len,
    }
}

impl TableSpec {
    pub fn preset(name: &str, rows: u64, seed: u64) -> Result<TableSpec> {
        let columns = match name {
            "lineorder-like" => vec![
                col("LO_CUSTKEY", int(1, 1_050_000)),
                col("LO_DISCOUNT", int(0, 10)),
                col("LO_EXTENDEDPRICE", int(90_000, 10_494_950)),
                // 1992-01-01 ..= 1998-08-02
                col("LO_ORDERDATE", ColumnGen::DateRange { start: 8035, end: 10440 }),
                col("LO_ORDERPRIORITY", string("12345-URGENTHIGHMEDIUMNOTSPECIFIEDLOW", 15)),
                col("LO_ORDTOTALPRICE", int(90_000, 55_000_000)),
                col("LO_PARTKEY", ColumnGen::Zipf { s: 1.1, n: 1_400_000 }),
                col("LO_QUANTITY", int(1, 50)),
                col("LO_REVENUE", int(80_000, 10_494_950)),
                col("LO_SUPPKEY", int(1, 70_000)),
                col("LO_SUPPLYCOST", int(54_000, 125_000)),
            ],
            "tripdata-like" => vec![
                col("medallion", string(HEX, 32)),
                col("hack_license", string(HEX, 32)),
                col("vendor_id", string("CMTVS", 3)),
                col("rate_code", int(1, 6)),
                col("store_and_fwd_flag", string("NY", 1)),
                // 2013 in unix seconds
                col("pickup_datetime", int(1_356_998_400, 1_388_534_399)),
                col("dropoff_datetime", int(1_356_998_400, 1_388_538_000)),
                col("passenger_count", ColumnGen::Zipf { s: 2.0, n: 6 }),
                col("trip_time_in_secs", int(0, 10_800)),
                col("trip_distance", float(0.0, 50.0)),
                col("pickup_longitude", float(-74.3, -73.7)),
                col("pickup_latitude", float(40.5, 40.95)),
                col("dropoff_longitude", float(-74.3, -73.7)),
                col("dropoff_latitude", float(40.5, 40.95)),
            ],
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (expected {})",
                    PRESETS.join(" or ")
                )))
            }
        };
        let key = match name {
            "lineorder-like" => 3,
            _ => 8,
        };
        Ok(TableSpec {
            columns,
            keys: vec![SortKey::asc(key)],
            rows,
            seed,
        })
    }

    pub fn schema(&self) -> Result<Schema> {
        for c in &self.columns {
            c.gen.validate()?;
        }
        Schema::new(
            self.columns
                .iter()
                .map(|c| Column::new(c.name.clone(), c.gen.column_type()))
                .collect(),
            self.keys.clone(),
        )
    }

    /// Serialized bytes per record, header included.
    pub fn declared_width(&self) -> usize {
        crate::record::RECORD_HEADER_BYTES + self.columns.iter().map(|c| c.gen.width()).sum::<usize>()
    }
}

enum Sampler {
    Int(Uniform<i64>),
    Date(Uniform<i32>),
    Zipf(Zipf<f64>),
    Str(Vec<u8>, usize),
    Float(Uniform<f64>),
}

impl Sampler {
    fn new(gen: &ColumnGen) -> Result<Sampler> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{gen:?}: {e}"));
        Ok(match gen {
            ColumnGen::UniformInt { lo, hi } => Sampler::Int(Uniform::new_inclusive(*lo, *hi).map_err(|e| bad(&e))?),
            ColumnGen::DateRange { start, end } => {
                Sampler::Date(Uniform::new_inclusive(*start, *end).map_err(|e| bad(&e))?)
            }
            ColumnGen::Zipf { s, n } => Sampler::Zipf(Zipf::new(*n as f64, *s).map_err(|e| bad(&e))?),
            ColumnGen::FixedString { alphabet, len } => Sampler::Str(alphabet.as_bytes().to_vec(), *len),
            ColumnGen::FloatRange { lo, hi } => Sampler::Float(Uniform::new(*lo, *hi).map_err(|e| bad(&e))?),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            Sampler::Int(d) => Value::Int64(d.sample(rng)),
            Sampler::Date(d) => Value::Date(d.sample(rng)),
            Sampler::Zipf(d) => Value::Int64(d.sample(rng) as i64),
            Sampler::Str(alpha, len) => {
                let s: String = (0..*len)
                    .map(|_| alpha[rng.random_range(0..alpha.len())] as char)
                    .collect();
                Value::String(s)
            }
            Sampler::Float(d) => Value::Float64(d.sample(rng)),
        }
    }
}

/// Deterministic record stream for a spec.
pub struct TableGen {
    rng: ChaCha8Rng,
    samplers: Vec<Sampler>,
    remaining: u64,
}

impl Iterator for TableGen {
    type Item = Record;

    fn next(&mut self) -> Option<Record> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let values = self.samplers.iter().map(|s| s.sample(&mut self.rng)).collect();
        Some(Record::new(values))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

pub fn generate(spec: &TableSpec) -> Result<TableGen> {
    spec.schema()?;
    Ok(TableGen {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        samplers: spec.columns.iter().map(|c| Sampler::new(&c.gen)).collect::<Result<_>>()?,
        remaining: spec.rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Fail on the first bad row instead of skipping it.
    pub strict: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            strict: true,
        }
    }
}

/// Records from a comma-separated file. Fields are not quoted: a comma always separates.
pub struct CsvRecords<R: std::io::Read> {
    reader: csv::Reader<R>,
    types: Vec<ColumnType>,
    strict: bool,
    skipped: u64,
    row: csv::StringRecord,
}

pub fn ingest_csv(path: &Path, schema: &Schema, opts: CsvOptions) -> Result<CsvRecords<File>> {
    let file = File::open(path).map_err(|e| Error::spill(path, e))?;
    Ok(csv_reader(file, schema, opts))
}

pub fn csv_reader<R: std::io::Read>(input: R, schema: &Schema, opts: CsvOptions) -> CsvRecords<R> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .quoting(false)
        .flexible(true)
        .from_reader(input);
    CsvRecords {
        reader,
        types: schema.columns().iter().map(|c| c.ty).collect(),
        strict: opts.strict,
        skipped: 0,
        row: csv::StringRecord::new(),
    }
}

impl<R: std::io::Read> CsvRecords<R> {
    /// Malformed rows skipped so far (non-strict mode).
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn convert(&self) -> std::result::Result<Record, String> {
        if self.row.len() != self.types.len() {
            return Err(format!("expected {} fields, found {}", self.types.len(), self.row.len()));
        }
        self.row
            .iter()
            .zip(&self.types)
            .enumerate()
            .map(|(i, (field, ty))| parse_value(field, *ty).map_err(|e| format!("field {}: {e}", i + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Record::new)
    }
}

impl<R: std::io::Read> Iterator for CsvRecords<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Result<Record>> {
        loop {
            match self.reader.read_record(&mut self.row) {
                Ok(false) => return None,
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Some(Err(Error::Csv {
                        line,
                        reason: e.to_string(),
                    }));
                }
            }
            let line = self.row.position().map_or(0, |p| p.line());
            match self.convert() {
                Ok(r) => return Some(Ok(r)),
                Err(reason) if self.strict => return Some(Err(Error::Csv { line, reason })),
                Err(reason) => {
                    log::debug!("skipping line {line}: {reason}");
                    self.skipped += 1;
                }
            }
        }
    }
}

/// Parses one CSV field. Dates are `YYYY-MM-DD` or a day number.
pub fn parse_value(field: &str, ty: ColumnType) -> std::result::Result<Value, String> {
    let f = field.trim();
    match ty {
        ColumnType::Int64 => f.parse().map(Value::Int64).map_err(|e| format!("`{f}` is not an int64: {e}")),
        ColumnType::Float64 => f
            .parse()
            .map(Value::Float64)
            .map_err(|e| format!("`{f}` is not a float64: {e}")),
        ColumnType::String => Ok(Value::String(field.to_string())),
        ColumnType::Date => {
            if let Ok(days) = f.parse::<i32>() {
                return Ok(Value::Date(days));
            }
            let d = NaiveDate::parse_from_str(f, "%Y-%m-%d").map_err(|e| format!("`{f}` is not a date: {e}"))?;
            let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
            Ok(Value::Date((d - epoch).num_days() as i32))
        }
    }
}
