//! The active clustering session.
//!
//! Each iteration clusters with the current constraints, picks one
//! uncertain sample, and asks the oracle about it until the sample lands in
//! a certain set. The session is a resumable state machine: with a human
//! oracle it parks in [`Status::AwaitingAnswer`] and continues when
//! [`Session::submit_answer`] delivers the answer. All state, including RNG
//! positions, serializes, so a saved session resumes bit-for-bit.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::certain::{CertainSets, QueryRecord, Resolution};
use crate::kmeans::ClusterAssignment;
use crate::metrics::{jaccard, v_measure};
use crate::oracle::{Answer, LoggedAnswer, Oracle, OracleError, OracleKind, SessionOracle};
use crate::rng::{derive_seed, SessionRng};
use crate::similarity::SimilarityMatrix;
use crate::spectral::{apply_constraints, spectral_learning_cluster, Constraint, ConstraintSet};
use crate::uncertainty::{select_informative, KnnGraph, SelectionContext, SelectionMode, DEFAULT_B, DEFAULT_KNN};
use crate::{Error, Result};

const STREAM_KMEANS: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    UrascN,
    UrascP,
    UrascGo,
    UrascNo,
    UrascPo,
    /// Uniformly random sample, resolved through the certain-set protocol.
    Random,
    /// Uniformly random unconstrained pair, one question per iteration.
    RandomPairs,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::UrascN,
        Strategy::UrascP,
        Strategy::UrascGo,
        Strategy::UrascNo,
        Strategy::UrascPo,
        Strategy::Random,
        Strategy::RandomPairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UrascN => "urasc_n",
            Strategy::UrascP => "urasc_p",
            Strategy::UrascGo => "urasc_go",
            Strategy::UrascNo => "urasc_no",
            Strategy::UrascPo => "urasc_po",
            Strategy::Random => "random",
            Strategy::RandomPairs => "random_pairs",
        }
    }

    pub fn selection_mode(self) -> Option<SelectionMode> {
        match self {
            Strategy::UrascN => Some(SelectionMode::Nonparametric),
            Strategy::UrascP => Some(SelectionMode::Parametric),
            Strategy::UrascGo => Some(SelectionMode::GradientOnly),
            Strategy::UrascNo => Some(SelectionMode::NonparametricOnly),
            Strategy::UrascPo => Some(SelectionMode::ParametricOnly),
            Strategy::Random | Strategy::RandomPairs => None,
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cluster count: fixed, or discovered as new certain sets appear
/// (starting from 2). Serialized as an integer or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterCount {
    Known(usize),
    Unknown,
}

impl Serialize for ClusterCount {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            ClusterCount::Known(k) => s.serialize_u64(*k as u64),
            ClusterCount::Unknown => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ClusterCount;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"auto\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<ClusterCount, E> {
                Ok(ClusterCount::Known(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<ClusterCount, E> {
                if v < 0 {
                    return Err(E::custom("cluster count must be nonnegative"));
                }
                Ok(ClusterCount::Known(v as usize))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<ClusterCount, E> {
                match v {
                    "auto" | "unknown" => Ok(ClusterCount::Unknown),
                    other => other
                        .parse()
                        .map(ClusterCount::Known)
                        .map_err(|_| E::custom(format!("bad cluster count {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    /// Ground truth from the dataset labels, flipped at `noise_rate`.
    #[default]
    Simulated,
    /// Answers submitted by a person through [`Session::submit_answer`].
    Interactive,
}

fn default_knn() -> usize {
    DEFAULT_KNN
}
fn default_b() -> usize {
    DEFAULT_B
}
fn default_eval_every() -> usize {
    1
}

/// Loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub strategy: Strategy,
    pub n_c: ClusterCount,
    /// Maximum number of oracle questions.
    pub query_budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default = "default_knn")]
    pub knn_k: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub oracle: OracleSource,
}

impl EngineConfig {
    pub fn new(strategy: Strategy, n_c: ClusterCount, query_budget: usize, seed: u64) -> Self {
        Self {
            strategy,
            n_c,
            query_budget,
            seed,
            noise_rate: 0.0,
            b: DEFAULT_B,
            knn_k: DEFAULT_KNN,
            eval_every: 1,
            oracle: OracleSource::Simulated,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if self.query_budget == 0 {
            return bad("query_budget must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} outside [0, 1]", self.noise_rate));
        }
        if self.b == 0 || self.knn_k == 0 || self.eval_every == 0 {
            return bad("b, knn_k and eval_every must be at least 1".into());
        }
        if let ClusterCount::Known(k) = self.n_c {
            if k == 0 || k > n {
                return bad(format!("cluster count {k} must lie in 1..={n}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum Status {
    Running,
    AwaitingAnswer { i: usize, j: usize },
    Finished,
}

/// One point of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub queries_used: usize,
    pub iteration: usize,
    /// Present when ground-truth labels are known.
    pub jcc: Option<f64>,
    pub v_measure: Option<f64>,
    pub n_c: usize,
    pub wall_ms: u64,
}

impl CurvePoint {
    /// Equality ignoring wall-clock time.
    pub fn same_result(&self, other: &CurvePoint) -> bool {
        self.queries_used == other.queries_used
            && self.iteration == other.iteration
            && self.n_c == other.n_c
            && self.jcc.map(f64::to_bits) == other.jcc.map(f64::to_bits)
            && self.v_measure.map(f64::to_bits) == other.v_measure.map(f64::to_bits)
    }
}

/// Question sequence in flight for the current iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Pending {
    Resolve(Resolution),
    Pair { i: usize, j: usize },
}

/// Full state of one active clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    config: EngineConfig,
    base: SimilarityMatrix,
    labels: Option<Vec<usize>>,
    knn: KnnGraph,
    constraints: ConstraintSet,
    sets: CertainSets,
    n_c: usize,
    iteration: usize,
    queries_used: usize,
    rng: SessionRng,
    oracle: SessionOracle,
    status: Status,
    pending: Option<Pending>,
    assignment: Option<ClusterAssignment>,
    records: Vec<QueryRecord>,
    curve: Vec<CurvePoint>,
    conflicts: usize,
}

impl Session {
    /// Sets up `W^0`, picks the first certain sample with the seeded RNG and
    /// fixes the initial cluster count (`k`, or 2 when unknown).
    pub fn new(config: EngineConfig, similarity: SimilarityMatrix, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = similarity.len();
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        config.validate(n)?;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} samples", l.len())));
            }
        }
        let oracle_kind = match config.oracle {
            OracleSource::Interactive => OracleKind::Interactive,
            OracleSource::Simulated if config.noise_rate > 0.0 => OracleKind::Noisy { rate: config.noise_rate },
            OracleSource::Simulated => OracleKind::GroundTruth,
        };
        let oracle = SessionOracle::from_kind(oracle_kind, labels.as_deref(), derive_seed(config.seed, STREAM_NOISE))?;
        let knn = KnnGraph::build(&similarity, config.knn_k)?;
        let mut rng = SessionRng::new(config.seed);
        let mut sets = CertainSets::new(n);
        sets.init_first_sample(rng.random_range(0..n))?;
        let n_c = match config.n_c {
            ClusterCount::Known(k) => k,
            ClusterCount::Unknown => 2.min(n),
        };
        Ok(Self {
            config,
            base: similarity,
            labels,
            knn,
            constraints: ConstraintSet::new(),
            sets,
            n_c,
            iteration: 0,
            queries_used: 0,
            rng,
            oracle,
            status: Status::Running,
            pending: None,
            assignment: None,
            records: Vec::new(),
            curve: Vec::new(),
            conflicts: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.status == Status::Finished
    }

    pub fn pending_pair(&self) -> Option<(usize, usize)> {
        match self.status {
            Status::AwaitingAnswer { i, j } => Some((i, j)),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn queries_used(&self) -> usize {
        self.queries_used
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn sets(&self) -> &CertainSets {
        &self.sets
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Latest clustering, once one has been computed.
    pub fn assignment(&self) -> Option<&ClusterAssignment> {
        self.assignment.as_ref()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    pub fn oracle_log(&self) -> &[LoggedAnswer] {
        self.oracle.log()
    }

    pub fn base_similarity(&self) -> &SimilarityMatrix {
        &self.base
    }

    /// Constraint pairs whose kind was overwritten by a later answer.
    pub fn conflicts(&self) -> usize {
        self.conflicts
    }

    /// Current `W^t`.
    pub fn current_similarity(&self) -> Result<SimilarityMatrix> {
        apply_constraints(&self.base, &self.constraints)
    }

    /// Stops the session (the oracle is satisfied).
    pub fn stop(&mut self) {
        self.status = Status::Finished;
    }

    /// Runs until the session finishes or needs a human answer.
    pub fn advance(&mut self, clock: &mut dyn FnMut() -> u64) -> Result<Status> {
        while self.status == Status::Running {
            self.step(clock)?;
        }
        Ok(self.status)
    }

    /// Runs the remainder of one iteration: cluster and select (unless a
    /// question sequence is already in flight), then ask questions until the
    /// sample is resolved, the budget is spent, or the oracle has no answer
    /// yet.
    pub fn step(&mut self, clock: &mut dyn FnMut() -> u64) -> Result<Status> {
        match self.status {
            Status::Finished => return Ok(Status::Finished),
            Status::AwaitingAnswer { .. } => return Ok(self.status),
            Status::Running => {}
        }
        if self.pending.is_none() {
            match self.cluster_and_select(clock)? {
                Some(p) => self.pending = Some(p),
                None => {
                    self.status = Status::Finished;
                    return Ok(self.status);
                }
            }
        }
        self.ask_pending()
    }

    /// Delivers a human answer for the pending pair and keeps going until the
    /// next question or the end.
    pub fn submit_answer(
        &mut self,
        i: usize,
        j: usize,
        answer: Answer,
        clock: &mut dyn FnMut() -> u64,
    ) -> Result<Status> {
        match self.status {
            Status::AwaitingAnswer { i: pi, j: pj } if (pi, pj) == (i, j) => {}
            Status::AwaitingAnswer { .. } => return Err(Error::StaleAnswer(i, j)),
            _ => return Err(Error::NotRunning),
        }
        self.oracle.supply(i, j, answer)?;
        self.status = Status::Running;
        self.ask_pending()?;
        self.advance(clock)
    }

    fn cluster_and_select(&mut self, clock: &mut dyn FnMut() -> u64) -> Result<Option<Pending>> {
        let kmeans_seed = derive_seed(self.config.seed, STREAM_KMEANS ^ ((self.iteration as u64) << 8));
        let n_c = self.n_c.min(self.len());
        let clustered = spectral_learning_cluster(&self.base, &self.constraints, n_c, kmeans_seed)?;
        self.assignment = Some(clustered.assignment.clone());

        let budget_spent = self.queries_used >= self.config.query_budget;
        let candidates = self.sets.uncertain_samples();
        let exhausted = match self.config.strategy {
            Strategy::RandomPairs => self.constraints.len() == self.len() * (self.len() - 1) / 2,
            _ => candidates.is_empty(),
        };
        let terminal = budget_spent || exhausted;
        if terminal || self.iteration.is_multiple_of(self.config.eval_every) {
            self.record_point(&clustered.assignment, clock)?;
        }
        if terminal {
            return Ok(None);
        }

        let pending = match self.config.strategy {
            Strategy::Random => {
                let x = candidates[self.rng.random_range(0..candidates.len())];
                Pending::Resolve(Resolution::start(&self.sets, x, &clustered.similarity)?)
            }
            Strategy::RandomPairs => {
                let (i, j) = self.random_open_pair();
                Pending::Pair { i, j }
            }
            s => {
                let mode = s.selection_mode().expect("active strategies have a mode");
                let ctx = SelectionContext {
                    embedding: &clustered.embedding,
                    assignment: &clustered.assignment,
                    similarity: &clustered.similarity,
                    sets: &self.sets,
                    knn: &self.knn,
                };
                let sel = select_informative(&candidates, &ctx, mode, self.config.b)?;
                debug_assert!(!self.sets.is_certain(sel.chosen));
                Pending::Resolve(Resolution::start(&self.sets, sel.chosen, &clustered.similarity)?)
            }
        };
        Ok(Some(pending))
    }

    fn random_open_pair(&mut self) -> (usize, usize) {
        let n = self.len();
        loop {
            let i = self.rng.random_range(0..n);
            let j = self.rng.random_range(0..n);
            if i != j && self.constraints.get(i, j).is_none() {
                return (i.min(j), i.max(j));
            }
        }
    }

    fn record_point(&mut self, asg: &ClusterAssignment, clock: &mut dyn FnMut() -> u64) -> Result<()> {
        if self.curve.last().is_some_and(|p| p.iteration == self.iteration) {
            return Ok(());
        }
        let (jcc, vm) = match &self.labels {
            Some(truth) => (Some(jaccard(&asg.labels, truth)?), Some(v_measure(&asg.labels, truth, 1.0)?.v)),
            None => (None, None),
        };
        self.curve.push(CurvePoint {
            queries_used: self.queries_used,
            iteration: self.iteration,
            jcc,
            v_measure: vm,
            n_c: self.n_c,
            wall_ms: clock(),
        });
        Ok(())
    }

    fn ask(&mut self, i: usize, j: usize) -> Result<Option<Answer>> {
        match self.oracle.answer(i, j) {
            Ok(a) => {
                self.queries_used += 1;
                Ok(Some(a))
            }
            Err(OracleError::Pending(..)) => {
                self.status = Status::AwaitingAnswer { i, j };
                Ok(None)
            }
            Err(OracleError::Unavailable(msg)) => Err(Error::OracleUnavailable(msg)),
        }
    }

    fn add_constraints(&mut self, q: &ConstraintSet) {
        self.conflicts += self.constraints.extend(q);
    }

    fn ask_pending(&mut self) -> Result<Status> {
        let Some(pending) = self.pending.take() else {
            return Ok(self.status);
        };
        match pending {
            Pending::Pair { i, j } => match self.ask(i, j)? {
                Some(kind) => {
                    self.add_constraints(&[Constraint { i, j, kind }].into_iter().collect());
                    self.iteration += 1;
                }
                None => self.pending = Some(Pending::Pair { i, j }),
            },
            Pending::Resolve(mut res) => {
                while let Some((x, rep)) = res.next_pair() {
                    if self.queries_used >= self.config.query_budget {
                        break;
                    }
                    match self.ask(x, rep)? {
                        Some(a) => res.record(a),
                        None => {
                            self.pending = Some(Pending::Resolve(res));
                            return Ok(self.status);
                        }
                    }
                }
                if res.is_decided() {
                    let x = res.sample;
                    let record = res.commit(&mut self.sets)?;
                    let expanded = self.sets.expand_constraints(x)?;
                    self.add_constraints(&expanded);
                    self.records.push(record);
                    if self.config.n_c == ClusterCount::Unknown && self.sets.m() > self.n_c {
                        self.n_c = self.sets.m().min(self.len());
                    }
                } else {
                    // Budget ran out mid-resolution: keep what was learned as
                    // plain pairwise constraints, leave the sample uncertain.
                    self.add_constraints(&res.asked_constraints());
                }
                self.iteration += 1;
            }
        }
        Ok(self.status)
    }
}

/// Runs a simulated session to completion and returns its curve.
pub fn run(config: EngineConfig, similarity: SimilarityMatrix, labels: Option<Vec<usize>>) -> Result<Vec<CurvePoint>> {
    if config.oracle == OracleSource::Interactive {
        return Err(Error::InvalidParameter("run needs a simulated oracle".into()));
    }
    let mut session = Session::new(config, similarity, labels)?;
    session.advance(&mut || 0)?;
    Ok(session.curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::similarity::{gaussian_similarity, Dataset};
    use crate::spectral::ConstraintKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Well-separated blobs along a line, `per` samples each.
    fn blobs(k: usize, per: usize, seed: u64) -> (SimilarityMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..k {
            for _ in 0..per {
                rows.push(alloc::vec![c as f64 * 10.0 + rng.random::<f64>(), rng.random::<f64>()]);
                labels.push(c);
            }
        }
        let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), Some(labels.clone())).unwrap();
        (gaussian_similarity(&ds, 1.0).unwrap(), labels)
    }

    fn no_clock() -> impl FnMut() -> u64 {
        || 0
    }

    #[test]
    fn initial_state() {
        let (w, labels) = blobs(3, 5, 0);
        let s = Session::new(
            EngineConfig::new(Strategy::UrascN, ClusterCount::Unknown, 10, 7),
            w.clone(),
            Some(labels.clone()),
        )
        .unwrap();
        assert_eq!(s.n_c(), 2);
        assert_eq!(s.sets().m(), 1);
        assert_eq!(s.sets().certain_count(), 1);
        assert!(s.constraints().is_empty());
        let again =
            Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Known(3), 10, 7), w, Some(labels)).unwrap();
        assert_eq!(again.n_c(), 3);
        assert_eq!(again.sets().sets()[0], s.sets().sets()[0]);
    }

    #[test]
    fn config_validation() {
        let (w, labels) = blobs(2, 4, 0);
        let mut cfg = EngineConfig::new(Strategy::UrascN, ClusterCount::Known(2), 0, 1);
        assert!(Session::new(cfg.clone(), w.clone(), Some(labels.clone())).is_err());
        cfg.query_budget = 5;
        cfg.noise_rate = 1.5;
        assert!(Session::new(cfg.clone(), w.clone(), Some(labels.clone())).is_err());
        cfg.noise_rate = 0.0;
        cfg.n_c = ClusterCount::Known(9);
        assert!(Session::new(cfg.clone(), w.clone(), Some(labels)).is_err());
        cfg.n_c = ClusterCount::Known(2);
        assert_eq!(Session::new(cfg, w, None), Err(Error::NoGroundTruth));
    }

    #[test]
    fn step_counts_questions() {
        let (w, labels) = blobs(3, 6, 2);
        let mut s =
            Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Known(3), 100, 3), w, Some(labels)).unwrap();
        let mut clock = no_clock();
        for _ in 0..6 {
            let before = s.queries_used();
            let records = s.records().len();
            s.step(&mut clock).unwrap();
            let rec = &s.records()[records];
            assert_eq!(s.queries_used() - before, rec.queries_used());
            assert_eq!(s.oracle_log().len(), s.queries_used());
        }
    }

    #[test]
    fn unknown_count_grows_with_sets() {
        let (w, labels) = blobs(3, 6, 4);
        let mut s =
            Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Unknown, 1000, 5), w, Some(labels)).unwrap();
        let mut clock = no_clock();
        let mut last = s.n_c();
        while !s.is_finished() {
            s.step(&mut clock).unwrap();
            assert!(s.n_c() >= last);
            assert!(s.n_c() >= s.sets().m().max(2));
            last = s.n_c();
        }
        assert_eq!(s.sets().m(), 3);
        assert_eq!(s.n_c(), 3);
    }

    #[test]
    fn finishes_when_all_certain() {
        let (w, labels) = blobs(2, 5, 1);
        let mut s = Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Known(2), 1000, 0), w, Some(labels))
            .unwrap();
        s.advance(&mut no_clock()).unwrap();
        assert!(s.is_finished());
        assert!(s.sets().uncertain_samples().is_empty());
        let last = s.curve().last().unwrap();
        assert_eq!(last.jcc, Some(1.0));
        assert_eq!(last.queries_used, s.queries_used());
    }

    #[test]
    fn budget_is_never_exceeded() {
        for budget in [1, 2, 3, 7, 13] {
            let (w, labels) = blobs(4, 5, 9);
            let mut s =
                Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Known(4), budget, 2), w, Some(labels))
                    .unwrap();
            s.advance(&mut no_clock()).unwrap();
            assert_eq!(s.queries_used(), budget);
            assert_eq!(s.oracle_log().len(), budget);
            let q: Vec<usize> = s.curve().iter().map(|p| p.queries_used).collect();
            assert!(q.windows(2).all(|w| w[0] < w[1]), "{q:?}");
            assert_eq!(*q.last().unwrap(), budget);
        }
    }

    #[test]
    fn single_query_budget_resolves_at_most_once() {
        let (w, labels) = blobs(2, 5, 3);
        let mut s =
            Session::new(EngineConfig::new(Strategy::UrascN, ClusterCount::Known(2), 1, 0), w, Some(labels)).unwrap();
        s.advance(&mut no_clock()).unwrap();
        assert!(s.records().len() <= 1);
        assert_eq!(s.queries_used(), 1);
    }

    #[test]
    fn deterministic_runs() {
        for strategy in Strategy::ALL {
            let (w, labels) = blobs(3, 6, 5);
            let cfg = EngineConfig::new(strategy, ClusterCount::Known(3), 12, 11);
            let a = run(cfg.clone(), w.clone(), Some(labels.clone())).unwrap();
            let b = run(cfg, w, Some(labels)).unwrap();
            assert_eq!(a, b, "{strategy}");
        }
    }

    #[test]
    fn random_pairs_ask_one_question_per_iteration() {
        let (w, labels) = blobs(2, 5, 6);
        let mut s =
            Session::new(EngineConfig::new(Strategy::RandomPairs, ClusterCount::Known(2), 8, 1), w, Some(labels))
                .unwrap();
        s.advance(&mut no_clock()).unwrap();
        assert_eq!(s.queries_used(), 8);
        assert_eq!(s.constraints().len(), 8);
        assert_eq!(s.iteration(), 8);
    }

    #[test]
    fn interactive_session_parks_and_resumes() {
        let (w, labels) = blobs(3, 5, 8);
        let mut cfg = EngineConfig::new(Strategy::UrascN, ClusterCount::Known(3), 20, 4);
        cfg.oracle = OracleSource::Interactive;
        let mut interactive = Session::new(cfg.clone(), w.clone(), Some(labels.clone())).unwrap();
        let mut clock = no_clock();
        interactive.advance(&mut clock).unwrap();

        cfg.oracle = OracleSource::Simulated;
        let mut simulated = Session::new(cfg, w, Some(labels.clone())).unwrap();
        simulated.advance(&mut clock).unwrap();

        while let Some((i, j)) = interactive.pending_pair() {
            // Idempotent until answered.
            assert_eq!(interactive.status(), Status::AwaitingAnswer { i, j });
            assert_eq!(
                interactive.submit_answer(j + 100, i, ConstraintKind::MustLink, &mut clock),
                Err(Error::StaleAnswer(j + 100, i))
            );
            let answer = if labels[i] == labels[j] { ConstraintKind::MustLink } else { ConstraintKind::CannotLink };
            interactive.submit_answer(i, j, answer, &mut clock).unwrap();
        }
        assert!(interactive.is_finished());
        assert_eq!(interactive.curve(), simulated.curve());
        assert_eq!(interactive.sets(), simulated.sets());
        assert_eq!(interactive.submit_answer(0, 1, ConstraintKind::MustLink, &mut clock), Err(Error::NotRunning));
    }

    #[test]
    fn cluster_count_serde() {
        let json = serde_json::to_string(&[ClusterCount::Known(3), ClusterCount::Unknown]).unwrap();
        assert_eq!(json, r#"[3,"auto"]"#);
        let back: Vec<ClusterCount> = serde_json::from_str(r#"[5,"auto","4"]"#).unwrap();
        assert_eq!(back, alloc::vec![ClusterCount::Known(5), ClusterCount::Unknown, ClusterCount::Known(4)]);
    }

    #[test]
    fn saved_midway_resumes_identically() {
        let (w, labels) = blobs(3, 7, 12);
        let mut cfg = EngineConfig::new(Strategy::UrascP, ClusterCount::Unknown, 25, 3);
        cfg.noise_rate = 0.1;
        let full = run(cfg.clone(), w.clone(), Some(labels.clone())).unwrap();

        let mut s = Session::new(cfg, w, Some(labels)).unwrap();
        let mut clock = no_clock();
        for _ in 0..4 {
            s.step(&mut clock).unwrap();
        }
        let json = serde_json::to_string(&s).unwrap();
        let mut resumed: Session = serde_json::from_str(&json).unwrap();
        assert_eq!(resumed, s);
        resumed.advance(&mut clock).unwrap();
        assert_eq!(resumed.curve(), full.as_slice());
    }
}
