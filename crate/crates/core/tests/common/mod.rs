#![allow(dead_code)]

use std::cmp::Ordering;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tapesort::{Column, ColumnType, Record, RecordBlock, Schema, SortKey, Value};

/// Full-record order used to canonicalize groups of equal keys.
pub fn full_cmp(a: &Record, b: &Record) -> Ordering {
    for (x, y) in a.values().iter().zip(b.values()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Reference result: a stable std sort by key, then every run of equal keys
/// canonicalized, since the operator does not promise stability.
pub fn canonical(schema: &Schema, records: &[Record]) -> Vec<Record> {
    let mut v = records.to_vec();
    v.sort_by(|a, b| schema.key_order(a, b));
    canonicalize_groups(schema, &mut v);
    v
}

pub fn canonicalize_groups(schema: &Schema, v: &mut [Record]) {
    let mut start = 0;
    while start < v.len() {
        let mut end = start + 1;
        while end < v.len() && schema.key_order(&v[start], &v[end]) == Ordering::Equal {
            end += 1;
        }
        v[start..end].sort_by(full_cmp);
        start = end;
    }
}

/// Checks `output` against the reference sort of `input`: keys must match
/// position by position and each equal-key group must hold the same records.
pub fn matches_reference(schema: &Schema, input: &[Record], output: &[Record]) -> Result<(), String> {
    if input.len() != output.len() {
        return Err(format!("{} records in, {} out", input.len(), output.len()));
    }
    let expect = canonical(schema, input);
    for (i, (e, o)) in expect.iter().zip(output).enumerate() {
        if schema.key_order(e, o) != Ordering::Equal {
            return Err(format!("key mismatch at {i}: expected {e:?}, got {o:?}"));
        }
    }
    let mut got = output.to_vec();
    canonicalize_groups(schema, &mut got);
    if got != expect {
        return Err("equal-key groups hold different records".into());
    }
    Ok(())
}

pub fn int_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            vec![Column::new("k", ColumnType::Int64), Column::new("p", ColumnType::Int64)],
            vec![SortKey::asc(0)],
        )
        .unwrap(),
    )
}

pub fn int_records(n: usize, key_range: i64, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Record::new(vec![Value::Int64(rng.random_range(0..key_range)), Value::Int64(i as i64)]))
        .collect()
}

/// A few schema shapes: composite keys, descending keys, strings, floats, dates.
pub fn random_schema(rng: &mut ChaCha8Rng) -> Arc<Schema> {
    let types = [ColumnType::Int64, ColumnType::Float64, ColumnType::String, ColumnType::Date];
    let ncols = rng.random_range(1..=4);
    let columns: Vec<Column> = (0..ncols)
        .map(|i| Column::new(format!("c{i}"), types[rng.random_range(0..types.len())]))
        .collect();
    let nkeys = rng.random_range(1..=ncols);
    let mut idx: Vec<usize> = (0..ncols).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let keys = idx[..nkeys]
        .iter()
        .map(|&c| if rng.random_bool(0.3) { SortKey::desc(c) } else { SortKey::asc(c) })
        .collect();
    Arc::new(Schema::new(columns, keys).unwrap())
}

pub fn random_record(schema: &Schema, rng: &mut ChaCha8Rng, spread: i64) -> Record {
    let values = schema
        .columns()
        .iter()
        .map(|c| match c.ty {
            ColumnType::Int64 => Value::Int64(rng.random_range(-spread..spread)),
            ColumnType::Float64 => {
                if rng.random_bool(0.01) {
                    Value::Float64(f64::NAN)
                } else {
                    Value::Float64(rng.random_range(-spread..spread) as f64 / 4.0)
                }
            }
            ColumnType::Date => Value::Date(rng.random_range(0..spread as i32)),
            ColumnType::String => {
                let len = rng.random_range(0..6);
                Value::String((0..len).map(|_| rng.random_range(b'a'..=b'e') as char).collect())
            }
        })
        .collect();
    Record::new(values)
}

pub fn blocks(schema: &Arc<Schema>, records: &[Record], size: usize) -> Vec<RecordBlock> {
    records
        .chunks(size.max(1))
        .map(|c| RecordBlock::new(schema.clone(), c.to_vec()))
        .collect()
}

/// Files (recursively) under `dir`.
pub fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(files_under(&p));
            }
            out.push(p);
        }
    }
    out
}

/// Bytes held by regular files under `dir`.
pub fn bytes_under(dir: &Path) -> u64 {
    files_under(dir)
        .iter()
        .filter_map(|p| std::fs::metadata(p).ok())
        .filter(|m| m.is_file())
        .map(|m| m.len())
        .sum()
}
