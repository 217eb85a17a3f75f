//! Tabular data model: schemas, typed values, records and the counting
//! key comparator used by every sorting stage.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length prefix in front of every serialized record.
pub const RECORD_HEADER_BYTES: usize = 4;

/// Bookkeeping charged per in-memory record on top of its serialized size:
/// the record handle (24 bytes) plus one slot in the reference array that
/// the in-memory sort permutes (8 bytes).
pub const RECORD_OVERHEAD_BYTES: usize = 32;

/// Largest payload a record frame can describe; `u32::MAX` is the run trailer sentinel.
pub const MAX_PAYLOAD_BYTES: usize = (u32::MAX - 1) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int64,
    Float64,
    String,
    /// Calendar date stored as a 32-bit integer (days or `yyyymmdd`).
    Date,
}

impl ColumnType {
    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Int64 => "int64",
            ColumnType::Float64 => "float64",
            ColumnType::String => "string",
            ColumnType::Date => "date",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "int64" | "int" | "i64" => Ok(ColumnType::Int64),
            "float64" | "float" | "f64" | "double" => Ok(ColumnType::Float64),
            "string" | "str" | "text" => Ok(ColumnType::String),
            "date" | "date32" => Ok(ColumnType::Date),
            other => Err(Error::Config(format!("unknown column type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub column: usize,
    #[serde(default)]
    pub descending: bool,
}

impl SortKey {
    pub fn asc(column: usize) -> Self {
        SortKey {
            column,
            descending: false,
        }
    }

    pub fn desc(column: usize) -> Self {
        SortKey {
            column,
            descending: true,
        }
    }
}

/// Column layout plus the ordered sort key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    columns: Vec<Column>,
    keys: Vec<SortKey>,
}

#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
    keys: Vec<SortKey>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.columns, raw.keys)
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>, keys: Vec<SortKey>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::Config("schema needs at least one key column".into()));
        }
        for key in &keys {
            if key.column >= columns.len() {
                return Err(Error::Config(format!(
                    "key column index {} out of range for {} columns",
                    key.column,
                    columns.len()
                )));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Config(format!("duplicate column name `{}`", c.name)));
            }
        }
        Ok(Schema { columns, keys })
    }

    /// Parses `name:type,name:type,...`.
    pub fn parse_columns(spec: &str) -> Result<Vec<Column>> {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|part| {
                let (name, ty) = part.split_once(':').ok_or_else(|| {
                    Error::Config(format!("column `{part}` must be written as name:type"))
                })?;
                Ok(Column::new(name.trim(), ColumnType::parse(ty)?))
            })
            .collect()
    }

    /// Parses `col[:asc|:desc],...` where `col` is a column name or index.
    pub fn parse_keys(columns: &[Column], spec: &str) -> Result<Vec<SortKey>> {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|part| {
                let (col, dir) = match part.rsplit_once(':') {
                    Some((c, d)) => (c.trim(), d.trim()),
                    None => (part.trim(), "asc"),
                };
                let descending = match dir.to_ascii_lowercase().as_str() {
                    "asc" => false,
                    "desc" => true,
                    other => {
                        return Err(Error::Config(format!("unknown key direction `{other}`")))
                    }
                };
                let column = match columns.iter().position(|c| c.name == col) {
                    Some(i) => i,
                    None => col
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("unknown key column `{col}`")))?,
                };
                Ok(SortKey { column, descending })
            })
            .collect()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn keys(&self) -> &[SortKey] {
        &self.keys
    }

    pub fn with_keys(&self, keys: Vec<SortKey>) -> Result<Schema> {
        Schema::new(self.columns.clone(), keys)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Fails unless `record` has one value per column with matching types.
    pub fn check(&self, record: &Record) -> Result<()> {
        if record.values.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "record has {} values, schema has {} columns",
                record.values.len(),
                self.columns.len()
            )));
        }
        for (v, c) in record.values.iter().zip(&self.columns) {
            if v.column_type() != c.ty {
                return Err(Error::Schema(format!(
                    "column `{}` expects {}, got {}",
                    c.name,
                    c.ty.name(),
                    v.column_type().name()
                )));
            }
        }
        Ok(())
    }

    /// Key order without touching any counter.
    pub fn key_order(&self, a: &Record, b: &Record) -> Ordering {
        for key in &self.keys {
            let ord = a.values[key.column].total_cmp(&b.values[key.column]);
            let ord = if key.descending { ord.reverse() } else { ord };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Int64(i64),
    Float64(f64),
    String(String),
    Date(i32),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int64(_) => ColumnType::Int64,
            Value::Float64(_) => ColumnType::Float64,
            Value::String(_) => ColumnType::String,
            Value::Date(_) => ColumnType::Date,
        }
    }

    /// Serialized width inside a record payload.
    pub fn encoded_len(&self) -> usize {
        match self {
            Value::Int64(_) | Value::Float64(_) => 8,
            Value::Date(_) => 4,
            Value::String(s) => 4 + s.len(),
        }
    }

    /// Total order: floats order NaN above everything, strings compare bytewise.
    /// Values of different types order by type tag.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int64(a), Value::Int64(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::String(a), Value::String(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Value::Float64(a), Value::Float64(b)) => match (a.is_nan(), b.is_nan()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (false, false) => a.total_cmp(b),
            },
            (a, b) => a.tag().cmp(&b.tag()),
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Value::Int64(_) => 0,
            Value::Float64(_) => 1,
            Value::String(_) => 2,
            Value::Date(_) => 3,
        }
    }
}

// Floats compare by bit pattern so that decode(encode(v)) == v holds for NaN too.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int64(a), Value::Int64(b)) => a == b,
            (Value::Float64(a), Value::Float64(b)) => a.to_bits() == b.to_bits(),
            (Value::String(a), Value::String(b)) => a == b,
            (Value::Date(a), Value::Date(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.tag().hash(state);
        match self {
            Value::Int64(v) => v.hash(state),
            Value::Float64(v) => v.to_bits().hash(state),
            Value::String(v) => v.hash(state),
            Value::Date(v) => v.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int64(v) => write!(f, "{v}"),
            Value::Float64(v) => write!(f, "{v}"),
            Value::String(v) => f.write_str(v),
            Value::Date(v) => write!(f, "{v}"),
        }
    }
}

/// One tuple. The serialized length is computed once at construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Record {
    values: Vec<Value>,
    encoded_len: usize,
}

impl Record {
    pub fn new(values: Vec<Value>) -> Self {
        let payload: usize = values.iter().map(Value::encoded_len).sum();
        Record {
            values,
            encoded_len: RECORD_HEADER_BYTES + payload,
        }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Value> {
        self.values
    }

    pub fn value(&self, column: usize) -> &Value {
        &self.values[column]
    }

    /// Length of this record's serialization, frame header included.
    pub fn byte_size(&self) -> usize {
        self.encoded_len
    }

    pub fn payload_len(&self) -> usize {
        self.encoded_len - RECORD_HEADER_BYTES
    }
}

impl From<Vec<Value>> for Record {
    fn from(values: Vec<Value>) -> Self {
        Record::new(values)
    }
}

/// Bytes charged against the sort's memory budget for holding `record`.
pub fn extract_key_size(record: &Record) -> usize {
    record.byte_size() + RECORD_OVERHEAD_BYTES
}

/// Unit of exchange between operators.
#[derive(Debug, Clone)]
pub struct RecordBlock {
    pub schema: Arc<Schema>,
    pub records: Vec<Record>,
}

impl RecordBlock {
    pub fn new(schema: Arc<Schema>, records: Vec<Record>) -> Self {
        RecordBlock { schema, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Strict ordering hook shared by the in-memory sort and the merge selectors.
pub trait KeyOrder<T: ?Sized> {
    fn compare(&self, a: &T, b: &T) -> Ordering;
}

/// Lexicographic key comparator that counts every record comparison it performs.
#[derive(Debug)]
pub struct SortKeyComparator {
    schema: Arc<Schema>,
    count: Cell<u64>,
}

impl SortKeyComparator {
    pub fn new(schema: Arc<Schema>) -> Self {
        SortKeyComparator {
            schema,
            count: Cell::new(0),
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Counted comparison. Callers must have validated both records against the schema.
    #[inline]
    pub fn compare(&self, a: &Record, b: &Record) -> Ordering {
        self.count.set(self.count.get() + 1);
        self.schema.key_order(a, b)
    }

    /// Counted comparison that first checks both records against the schema.
    pub fn try_compare(&self, a: &Record, b: &Record) -> Result<Ordering> {
        self.schema
            .check(a)
            .and_then(|_| self.schema.check(b))
            .map_err(|e| Error::Usage(format!("compare: {e}")))?;
        Ok(self.compare(a, b))
    }

    pub fn comparisons(&self) -> u64 {
        self.count.get()
    }

    pub fn reset(&self) {
        self.count.set(0);
    }
}

impl KeyOrder<Record> for SortKeyComparator {
    #[inline]
    fn compare(&self, a: &Record, b: &Record) -> Ordering {
        SortKeyComparator::compare(self, a, b)
    }
}

impl<T: ?Sized, O: KeyOrder<T> + ?Sized> KeyOrder<T> for &O {
    #[inline]
    fn compare(&self, a: &T, b: &T) -> Ordering {
        (**self).compare(a, b)
    }
}
