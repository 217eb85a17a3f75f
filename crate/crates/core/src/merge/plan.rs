//! Polyphase run distribution (Knuth, Algorithm 5.4.2D) with horizontal
//! dummy placement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Polyphase,
    SinglePassMultiway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolyphasePlan {
    /// Perfect distribution over the `T - 1` input tapes.
    pub targets: Vec<u64>,
    /// Dummy runs per input tape; real runs on tape i are `targets[i] - dummies[i]`.
    pub dummies: Vec<u64>,
    pub passes: u32,
}

impl PolyphasePlan {
    pub fn real_runs(&self) -> Vec<u64> {
        self.targets.iter().zip(&self.dummies).map(|(t, d)| t - d).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum MergePlan {
    /// Zero or one run: nothing to merge.
    Trivial,
    SinglePassMultiway { runs: u64 },
    Polyphase(PolyphasePlan),
}

impl MergePlan {
    pub fn passes(&self) -> u32 {
        match self {
            MergePlan::Trivial => 0,
            MergePlan::SinglePassMultiway { .. } => 1,
            MergePlan::Polyphase(p) => p.passes,
        }
    }

    pub fn kind(&self) -> Option<PatternKind> {
        match self {
            MergePlan::Trivial => None,
            MergePlan::SinglePassMultiway { .. } => Some(PatternKind::SinglePassMultiway),
            MergePlan::Polyphase(_) => Some(PatternKind::Polyphase),
        }
    }
}

/// Online distributor: hands out the input tape for each new run without
/// knowing how many runs will follow. The level grows whenever the current
/// perfect distribution is filled.
#[derive(Debug, Clone)]
pub struct Distributor {
    tapes: usize,
    a: Vec<u64>,
    d: Vec<u64>,
    level: u32,
    j: usize,
    placed: u64,
}

impl Distributor {
    pub fn new(tape_count: usize) -> Result<Self> {
        if tape_count < 2 {
            return Err(Error::Config(format!(
                "at least 2 tapes are required, got {tape_count}"
            )));
        }
        let p = tape_count - 1;
        let mut a = vec![1; p + 1];
        let mut d = vec![1; p + 1];
        a[p] = 0;
        d[p] = 0;
        Ok(Distributor {
            tapes: tape_count,
            a,
            d,
            level: 1,
            j: 0,
            placed: 0,
        })
    }

    pub fn tape_count(&self) -> usize {
        self.tapes
    }

    /// Index of the initial output tape.
    pub fn output_tape(&self) -> usize {
        self.tapes - 1
    }

    pub fn runs_placed(&self) -> u64 {
        self.placed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Input tape that receives the next run.
    pub fn next_tape(&mut self) -> Result<usize> {
        if self.placed > 0 {
            self.advance()?;
        }
        self.d[self.j] -= 1;
        self.placed += 1;
        Ok(self.j)
    }

    fn advance(&mut self) -> Result<()> {
        let p = self.tapes - 1;
        if self.d[self.j] < self.d[self.j + 1] {
            self.j += 1;
        } else if self.d[self.j] == 0 {
            if p < 2 {
                return Err(Error::Config(
                    "two tapes can hold only a single run; use at least 3 tapes".into(),
                ));
            }
            self.level += 1;
            let a0 = self.a[0];
            for i in 0..p {
                self.d[i] = a0 + self.a[i + 1] - self.a[i];
                self.a[i] = a0 + self.a[i + 1];
            }
            self.j = 0;
        } else {
            self.j = 0;
        }
        Ok(())
    }

    /// Dummy runs still owed per tape (length `T`, output tape last with 0).
    pub fn dummies(&self) -> Vec<u64> {
        self.d.clone()
    }

    pub fn plan(&self) -> MergePlan {
        let runs = self.placed;
        if runs <= 1 {
            MergePlan::Trivial
        } else if self.tapes as u64 > runs {
            MergePlan::SinglePassMultiway { runs }
        } else {
            let p = self.tapes - 1;
            MergePlan::Polyphase(PolyphasePlan {
                targets: self.a[..p].to_vec(),
                dummies: self.d[..p].to_vec(),
                passes: self.level,
            })
        }
    }
}

/// Plan for a known run count.
pub fn plan_distribution(total_runs: u64, tape_count: usize) -> Result<MergePlan> {
    let mut dist = Distributor::new(tape_count)?;
    for _ in 0..total_runs {
        dist.next_tape()?;
    }
    Ok(dist.plan())
}
