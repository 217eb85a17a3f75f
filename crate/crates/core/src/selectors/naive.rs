use crate::error::Result;
use crate::record::KeyOrder;

use super::{check_k, exhausted_error, precedes, RunSelector};

/// Linear scan over all live heads on every selection.
pub struct NaiveSelector<T, O> {
    heads: Vec<Option<T>>,
    order: O,
    live: usize,
    current: Option<usize>,
    comparisons: u64,
}

impl<T, O: KeyOrder<T>> NaiveSelector<T, O> {
    /// No comparisons happen at build time; the first scan is deferred to the first selection.
    pub fn new(heads: Vec<Option<T>>, order: O) -> Result<Self> {
        check_k(heads.len())?;
        let live = heads.iter().filter(|h| h.is_some()).count();
        Ok(NaiveSelector {
            heads,
            order,
            live,
            current: None,
            comparisons: 0,
        })
    }

    fn scan(&mut self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, head) in self.heads.iter().enumerate() {
            let Some(candidate) = head else { continue };
            best = match best {
                None => Some(i),
                Some(b) => {
                    self.comparisons += 1;
                    let incumbent = self.heads[b].as_ref().unwrap();
                    if precedes(&self.order, candidate, i, incumbent, b) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }
}

impl<T, O: KeyOrder<T>> RunSelector<T> for NaiveSelector<T, O> {
    fn k(&self) -> usize {
        self.heads.len()
    }

    fn live(&self) -> usize {
        self.live
    }

    fn winner(&mut self) -> Option<usize> {
        if self.current.is_none() && self.live > 0 {
            self.current = self.scan();
        }
        self.current
    }

    fn head(&self, run: usize) -> Option<&T> {
        self.heads.get(run).and_then(Option::as_ref)
    }

    fn pop_and_replace(&mut self, next: Option<T>) -> Result<T> {
        let w = self.winner().ok_or_else(exhausted_error)?;
        self.current = None;
        if next.is_none() {
            self.live -= 1;
        }
        Ok(std::mem::replace(&mut self.heads[w], next).unwrap())
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
    fn replace_example() {
        let c = Counting::default();
        let mut s = NaiveSelector::new(vec![Some(7i64), Some(3), Some(9), Some(1)], &c).unwrap();
        assert_eq!(s.comparisons(), 0);
        assert_eq!(s.pop_and_replace(Some(5)).unwrap(), 1);
        assert_eq!(s.comparisons(), 3);
        assert_eq!(s.heads, vec![Some(7), Some(3), Some(9), Some(5)]);
        assert_eq!(s.winner(), Some(1));
        assert_eq!(s.comparisons(), 6);
        assert_eq!(c.0.get(), 6);
    }

    #[test]
    fn live_minus_one_per_pop() {
        let c = Counting::default();
        let mut s = NaiveSelector::new(vec![Some(1i64), None, Some(2), Some(3)], &c).unwrap();
        assert_eq!(s.live(), 3);
        s.pop_and_replace(None).unwrap();
        assert_eq!(s.comparisons(), 2);
        s.pop_and_replace(None).unwrap();
        assert_eq!(s.comparisons(), 3);
        s.pop_and_replace(None).unwrap();
        assert_eq!(s.comparisons(), 3);
    }

    // m pops over k live runs with no exhaustion cost m*(k-1).
    #[test]
    fn closed_form_count() {
        let k = 6;
        let m = 40;
        let c = Counting::default();
        let mut s = NaiveSelector::new((0..k).map(|i| Some(i as i64)).collect(), &c).unwrap();
        for _ in 0..m {
            let w = s.winner().unwrap();
            let v = *s.head(w).unwrap();
            s.pop_and_replace(Some(v + k as i64)).unwrap();
        }
        assert_eq!(s.comparisons(), (m * (k - 1)) as u64);
    }
}
