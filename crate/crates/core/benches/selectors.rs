use std::cmp::Ordering;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tapesort::record::KeyOrder;
use tapesort::selectors::{self, SelectorKind};

struct Natural;

impl KeyOrder<u64> for Natural {
    fn compare(&self, a: &u64, b: &u64) -> Ordering {
        a.cmp(b)
    }
}

/// `k` sorted runs, stored reversed so `pop` yields the next head.
fn runs(k: usize, total: usize, distinct: u64, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let mut v: Vec<u64> = (0..total / k).map(|_| rng.random_range(0..distinct)).collect();
            v.sort_unstable_by(|a, b| b.cmp(a));
            v
        })
        .collect()
}

fn merge(kind: SelectorKind, mut runs: Vec<Vec<u64>>) -> u64 {
    let heads = runs.iter_mut().map(|r| r.pop()).collect();
    let mut sel = selectors::build(kind, heads, Natural).unwrap();
    let mut acc = 0u64;
    while let Some(w) = sel.winner() {
        let next = runs[w].pop();
        acc = acc.wrapping_add(sel.pop_and_replace(next).unwrap());
    }
    acc
}

fn bench_selectors(c: &mut Criterion) {
    const TOTAL: usize = 200_000;
    for (label, distinct) in [("unique", u64::MAX), ("dup", 2_400)] {
        let mut group = c.benchmark_group(format!("merge-{label}"));
        group.throughput(Throughput::Elements(TOTAL as u64));
        for k in [16usize, 84] {
            let input = runs(k, TOTAL, distinct, k as u64);
            for kind in SelectorKind::ALL {
                group.bench_with_input(BenchmarkId::new(kind.name(), k), &input, |b, input| {
                    b.iter_batched(|| input.clone(), |r| black_box(merge(kind, r)), criterion::BatchSize::LargeInput)
                });
            }
        }
        group.finish();
    }
}

criterion_group!(benches, bench_selectors);
criterion_main!(benches);
