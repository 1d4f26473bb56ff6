//! Certain-sample sets and the pairwise query protocol that places one
//! selected sample into exactly one of them.
//!
//! Samples in the same set are known to share a cluster; samples in
//! different sets are known to differ. Resolving a sample asks the oracle
//! about one representative per set, most similar first, until a must-link
//! arrives. If none does, the sample starts a new set.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::oracle::{Answer, Oracle, OracleError};
use crate::similarity::SimilarityMatrix;
use crate::spectral::{ConstraintKind, ConstraintSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertainSets {
    sets: Vec<Vec<usize>>,
    membership: Vec<Option<usize>>,
}

/// The member of one certain set most similar to a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub set: usize,
    pub sample: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "set")]
pub enum Outcome {
    JoinedSet(usize),
    NewSet(usize),
}

/// Audit record of one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub sample: usize,
    /// `(representative, answer)` in the order asked.
    pub asked: Vec<(usize, Answer)>,
    pub outcome: Outcome,
}

impl QueryRecord {
    pub fn queries_used(&self) -> usize {
        self.asked.len()
    }
}

impl CertainSets {
    /// Empty store for `n` samples.
    pub fn new(n: usize) -> Self {
        Self { sets: Vec::new(), membership: vec![None; n] }
    }

    /// `Z = {{x}}`.
    pub fn init_first_sample(&mut self, x: usize) -> Result<()> {
        if !self.sets.is_empty() {
            return Err(Error::AlreadyInitialized);
        }
        self.check_index(x)?;
        self.sets.push(vec![x]);
        self.membership[x] = Some(0);
        Ok(())
    }

    /// Number of sets `m`.
    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn set_of(&self, x: usize) -> Option<usize> {
        self.membership.get(x).copied().flatten()
    }

    pub fn is_certain(&self, x: usize) -> bool {
        self.set_of(x).is_some()
    }

    /// `O`, ascending.
    pub fn certain_samples(&self) -> Vec<usize> {
        (0..self.n()).filter(|&x| self.is_certain(x)).collect()
    }

    pub fn certain_count(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Samples not yet in any set, ascending.
    pub fn uncertain_samples(&self) -> Vec<usize> {
        (0..self.n()).filter(|&x| !self.is_certain(x)).collect()
    }

    fn check_index(&self, x: usize) -> Result<()> {
        if x >= self.n() {
            return Err(Error::IndexOutOfRange { index: x, n: self.n() });
        }
        Ok(())
    }

    /// One representative per set, `argmax_{l in Z_j} w[x][l]`, sorted by
    /// similarity descending, ties to the lower set index. Within a set,
    /// ties go to the lower sample index.
    pub fn representatives(&self, x: usize, w: &SimilarityMatrix) -> Result<Vec<Representative>> {
        self.check_index(x)?;
        if self.is_certain(x) {
            return Err(Error::AlreadyCertain(x));
        }
        let row = w.row(x);
        let mut reps: Vec<Representative> = self
            .sets
            .iter()
            .enumerate()
            .map(|(set, members)| {
                let mut best = members[0];
                for &l in &members[1..] {
                    if row[l] > row[best] || (row[l] == row[best] && l < best) {
                        best = l;
                    }
                }
                Representative { set, sample: best, similarity: row[best] }
            })
            .collect();
        reps.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.set.cmp(&b.set)));
        Ok(reps)
    }

    /// Runs the full query protocol for `x` against a synchronous oracle.
    /// On oracle failure nothing is changed.
    pub fn resolve_sample(
        &mut self,
        x: usize,
        w: &SimilarityMatrix,
        oracle: &mut dyn Oracle,
    ) -> Result<(QueryRecord, ConstraintSet)> {
        let mut res = Resolution::start(self, x, w)?;
        while let Some((i, j)) = res.next_pair() {
            let answer = oracle.answer(i, j).map_err(|e| match e {
                OracleError::Pending(..) => Error::OracleUnavailable(format!("{e}")),
                OracleError::Unavailable(msg) => Error::OracleUnavailable(msg),
            })?;
            res.record(answer);
        }
        let record = res.commit(self)?;
        let constraints = self.expand_constraints(x)?;
        Ok((record, constraints))
    }

    /// Must-links from `x` to the rest of its set and cannot-links to every
    /// member of every other set: `|O| - 1` constraints in total.
    pub fn expand_constraints(&self, x: usize) -> Result<ConstraintSet> {
        self.check_index(x)?;
        let own = self.set_of(x).ok_or(Error::NotCertain(x))?;
        let mut out = ConstraintSet::new();
        for (s, members) in self.sets.iter().enumerate() {
            let kind = if s == own { ConstraintKind::MustLink } else { ConstraintKind::CannotLink };
            for &l in members {
                if l != x {
                    out.insert(x, l, kind)?;
                }
            }
        }
        Ok(out)
    }

    fn join(&mut self, x: usize, set: usize) {
        self.sets[set].push(x);
        self.membership[x] = Some(set);
    }

    fn open_set(&mut self, x: usize) -> usize {
        self.sets.push(vec![x]);
        let set = self.sets.len() - 1;
        self.membership[x] = Some(set);
        set
    }
}

/// A resolution in progress. It can be parked between questions (for a
/// human oracle) and serialized with the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub sample: usize,
    pub reps: Vec<Representative>,
    pub asked: Vec<(usize, Answer)>,
    /// Set count when the resolution started.
    pub m: usize,
}

impl Resolution {
    pub fn start(sets: &CertainSets, x: usize, w: &SimilarityMatrix) -> Result<Self> {
        Ok(Self { sample: x, reps: sets.representatives(x, w)?, asked: Vec::new(), m: sets.m() })
    }

    /// The next `(sample, representative)` pair to ask, or `None` once the
    /// outcome is decided.
    pub fn next_pair(&self) -> Option<(usize, usize)> {
        if self.is_decided() {
            None
        } else {
            Some((self.sample, self.reps[self.asked.len()].sample))
        }
    }

    pub fn is_decided(&self) -> bool {
        self.asked.len() == self.reps.len() || self.asked.last().is_some_and(|&(_, a)| a == ConstraintKind::MustLink)
    }

    /// Records the answer to the pair returned by [`Resolution::next_pair`].
    pub fn record(&mut self, answer: Answer) {
        let rep = self.reps[self.asked.len()].sample;
        self.asked.push((rep, answer));
    }

    pub fn outcome(&self) -> Option<Outcome> {
        if !self.is_decided() {
            return None;
        }
        Some(match self.asked.last() {
            Some(&(_, ConstraintKind::MustLink)) => Outcome::JoinedSet(self.reps[self.asked.len() - 1].set),
            _ => Outcome::NewSet(self.m),
        })
    }

    /// Applies the decided outcome to `sets`.
    pub fn commit(self, sets: &mut CertainSets) -> Result<QueryRecord> {
        if sets.m() != self.m || sets.is_certain(self.sample) {
            return Err(Error::InvalidInput("certain sets changed during resolution".into()));
        }
        let outcome = self.outcome().ok_or_else(|| Error::InvalidInput("resolution is not finished".into()))?;
        let outcome = match outcome {
            Outcome::JoinedSet(s) => {
                sets.join(self.sample, s);
                Outcome::JoinedSet(s)
            }
            Outcome::NewSet(_) => Outcome::NewSet(sets.open_set(self.sample)),
        };
        Ok(QueryRecord { sample: self.sample, asked: self.asked, outcome })
    }

    /// Pairwise constraints implied by the answers so far, one per question.
    pub fn asked_constraints(&self) -> ConstraintSet {
        self.asked.iter().map(|&(rep, kind)| crate::spectral::Constraint { i: self.sample, j: rep, kind }).collect()
    }
}
