use crate::error::Result;
use crate::record::KeyOrder;

use super::{check_k, exhausted_error, precedes, RunSelector};

/// Tournament tree whose internal nodes remember the loser of each match.
///
/// Leaves are the `k` runs padded up to a power of two. Node `n`'s children
/// are `2n` and `2n + 1`; leaf `i` sits at position `padded + i`. Slot 0
/// holds the overall winner. Padded and exhausted leaves act as +infinity
/// keys, so every replacement replays exactly `log2(padded)` matches.
pub struct LoserTreeSelector<T, O> {
    heads: Vec<Option<T>>,
    tree: Vec<usize>,
    padded: usize,
    live: usize,
    order: O,
    comparisons: u64,
}

impl<T, O: KeyOrder<T>> LoserTreeSelector<T, O> {
    /// Builds the tournament bottom-up with `padded - 1` matches.
    pub fn new(heads: Vec<Option<T>>, order: O) -> Result<Self> {
        check_k(heads.len())?;
        let padded = heads.len().next_power_of_two();
        let live = heads.iter().filter(|h| h.is_some()).count();
        let mut s = LoserTreeSelector {
            heads,
            tree: vec![0; padded],
            padded,
            live,
            order,
            comparisons: 0,
        };
        let mut winners = vec![0usize; padded];
        let winner_of = |node: usize, winners: &[usize]| {
            if node >= padded {
                node - padded
            } else {
                winners[node]
            }
        };
        for node in (1..padded).rev() {
            let a = winner_of(2 * node, &winners);
            let b = winner_of(2 * node + 1, &winners);
            if s.beats(a, b) {
                winners[node] = a;
                s.tree[node] = b;
            } else {
                winners[node] = b;
                s.tree[node] = a;
            }
        }
        s.tree[0] = if padded == 1 { 0 } else { winners[1] };
        Ok(s)
    }

    /// One match between leaves `a` and `b`; sentinels lose to any real head.
    #[inline]
    fn beats(&mut self, a: usize, b: usize) -> bool {
        self.comparisons += 1;
        match (self.leaf(a), self.leaf(b)) {
            (Some(x), Some(y)) => precedes(&self.order, x, a, y, b),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => a < b,
        }
    }

    #[inline]
    fn leaf(&self, i: usize) -> Option<&T> {
        self.heads.get(i).and_then(Option::as_ref)
    }

    pub fn padded(&self) -> usize {
        self.padded
    }

    /// Run index stored at each tree slot; slot 0 is the winner.
    pub fn nodes(&self) -> &[usize] {
        &self.tree
    }
}

impl<T, O: KeyOrder<T>> RunSelector<T> for LoserTreeSelector<T, O> {
    fn k(&self) -> usize {
        self.heads.len()
    }

    fn live(&self) -> usize {
        self.live
    }

    fn winner(&mut self) -> Option<usize> {
        (self.live > 0).then_some(self.tree[0])
    }

    fn head(&self, run: usize) -> Option<&T> {
        self.leaf(run)
    }

    fn pop_and_replace(&mut self, next: Option<T>) -> Result<T> {
        if self.live == 0 {
            return Err(exhausted_error());
        }
        let w = self.tree[0];
        if next.is_none() {
            self.live -= 1;
        }
        let out = std::mem::replace(&mut self.heads[w], next).unwrap();
        let mut current = w;
        let mut node = (self.padded + w) / 2;
        while node >= 1 {
            let stored = self.tree[node];
            if self.beats(stored, current) {
                self.tree[node] = current;
                current = stored;
            }
            node /= 2;
        }
        self.tree[0] = current;
        Ok(out)
    }

    fn comparisons(&self) -> u64 {
        self.comparisons
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selectors::testing::Counting;

    #[test]
    fn build_matches_hand_tournament() {
        let c = Counting::default();
        let s = LoserTreeSelector::new(vec![Some(7i64), Some(3), Some(9), Some(1)], &c).unwrap();
        // 7 vs 3 -> loser run 0; 9 vs 1 -> loser run 2; 3 vs 1 -> loser run 1; winner run 3
        assert_eq!(s.nodes(), &[3, 1, 0, 2]);
        assert_eq!(s.comparisons(), 3);
    }

    #[test]
    fn replacement_walks_one_path() {
        let c = Counting::default();
        let mut s = LoserTreeSelector::new(vec![Some(7i64), Some(3), Some(9), Some(1)], &c).unwrap();
        assert_eq!(s.pop_and_replace(Some(5)).unwrap(), 1);
        assert_eq!(s.comparisons() - 3, 2);
        assert_eq!(s.winner(), Some(1));
    }

    #[test]
    fn exact_path_cost_for_odd_k() {
        for k in [1usize, 2, 3, 5, 7, 8, 9, 84] {
            let c = Counting::default();
            let mut s =
                LoserTreeSelector::new((0..k).map(|i| Some((i * 37 % 101) as i64)).collect(), &c)
                    .unwrap();
            let padded = k.next_power_of_two();
            assert_eq!(s.comparisons(), padded as u64 - 1);
            let depth = padded.trailing_zeros() as u64;
            let mut prev = s.comparisons();
            let mut x = 0i64;
            while s.winner().is_some() {
                x += 1;
                let next = (x < 3 * k as i64).then_some(x * 13 % 200);
                s.pop_and_replace(next).unwrap();
                assert_eq!(s.comparisons() - prev, depth, "k={k}");
                prev = s.comparisons();
            }
        }
    }

    #[test]
    fn closed_form_power_of_two() {
        let k = 8usize;
        let m = 50u64;
        let c = Counting::default();
        let mut s = LoserTreeSelector::new((0..k).map(|i| Some(i as i64)).collect(), &c).unwrap();
        for _ in 0..m {
            let w = s.winner().unwrap();
            let v = *s.head(w).unwrap();
            s.pop_and_replace(Some(v + k as i64)).unwrap();
        }
        assert_eq!(s.comparisons(), (k as u64 - 1) + m * 3);
        assert_eq!(c.0.get(), s.comparisons());
    }

    #[test]
    fn all_exhausted_heads() {
        let c = Counting::default();
        let mut s = LoserTreeSelector::new(vec![None::<i64>, None, None], &c).unwrap();
        assert_eq!(s.winner(), None);
        assert!(s.pop_and_replace(Some(1)).is_err());
    }
}
