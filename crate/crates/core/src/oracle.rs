//! Sources of must-link / cannot-link answers.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SessionRng;
use crate::spectral::ConstraintKind;
use crate::{Error, Result};

/// An oracle answer is the constraint it asserts.
pub type Answer = ConstraintKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    /// No answer yet; the caller should park and ask again later.
    #[error("answer for ({0}, {1}) is pending")]
    Pending(usize, usize),
    #[error("oracle unavailable: {0}")]
    Unavailable(alloc::string::String),
}

pub trait Oracle {
    fn answer(&mut self, i: usize, j: usize) -> Result<Answer, OracleError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedAnswer {
    pub i: usize,
    pub j: usize,
    pub answer: Answer,
    /// Set when a noisy oracle inverted the true answer.
    pub flipped: bool,
}

/// Most recent logged answer for the unordered pair `(i, j)`.
pub fn replay(log: &[LoggedAnswer], i: usize, j: usize) -> Result<Answer> {
    log.iter()
        .rev()
        .find(|e| (e.i == i && e.j == j) || (e.i == j && e.j == i))
        .map(|e| e.answer)
        .ok_or(Error::NotLogged(i, j))
}

fn truth(labels: &[usize], i: usize, j: usize) -> Result<Answer, OracleError> {
    match (labels.get(i), labels.get(j)) {
        (Some(a), Some(b)) if a == b => Ok(ConstraintKind::MustLink),
        (Some(_), Some(_)) => Ok(ConstraintKind::CannotLink),
        _ => Err(OracleError::Unavailable(alloc::format!("pair ({i}, {j}) outside the labelled range"))),
    }
}

fn flip(a: Answer) -> Answer {
    match a {
        ConstraintKind::MustLink => ConstraintKind::CannotLink,
        ConstraintKind::CannotLink => ConstraintKind::MustLink,
    }
}

/// What kind of oracle a session uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleKind {
    GroundTruth,
    Noisy { rate: f64 },
    Interactive,
}

/// Oracle state owned by a session, including its answer log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOracle {
    source: Source,
    log: Vec<LoggedAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    GroundTruth { labels: Vec<usize> },
    Noisy { labels: Vec<usize>, rate: f64, rng: Box<SessionRng> },
    Interactive { supplied: Option<(usize, usize, Answer)> },
}

impl SessionOracle {
    pub fn ground_truth(labels: Vec<usize>) -> Self {
        Self { source: Source::GroundTruth { labels }, log: Vec::new() }
    }

    /// Flips each true answer independently with probability `rate`.
    pub fn noisy(labels: Vec<usize>, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidParameter(alloc::format!("noise rate {rate} outside [0, 1]")));
        }
        Ok(Self { source: Source::Noisy { labels, rate, rng: Box::new(SessionRng::new(seed)) }, log: Vec::new() })
    }

    /// Answers arrive through [`SessionOracle::supply`].
    pub fn interactive() -> Self {
        Self { source: Source::Interactive { supplied: None }, log: Vec::new() }
    }

    /// Builds the oracle for `kind`. Simulated kinds need labels.
    pub fn from_kind(kind: OracleKind, labels: Option<&[usize]>, seed: u64) -> Result<Self> {
        match kind {
            OracleKind::Interactive => Ok(Self::interactive()),
            OracleKind::GroundTruth => Ok(Self::ground_truth(labels.ok_or(Error::NoGroundTruth)?.to_vec())),
            OracleKind::Noisy { rate } => Self::noisy(labels.ok_or(Error::NoGroundTruth)?.to_vec(), rate, seed),
        }
    }

    pub fn is_interactive(&self) -> bool {
        matches!(self.source, Source::Interactive { .. })
    }

    /// Hands a human answer to an interactive oracle; it is consumed by the
    /// next matching [`Oracle::answer`] call.
    pub fn supply(&mut self, i: usize, j: usize, answer: Answer) -> Result<()> {
        match &mut self.source {
            Source::Interactive { supplied } => {
                *supplied = Some((i, j, answer));
                Ok(())
            }
            _ => Err(Error::InvalidInput("only interactive oracles accept supplied answers".into())),
        }
    }

    pub fn log(&self) -> &[LoggedAnswer] {
        &self.log
    }

    pub fn flips(&self) -> usize {
        self.log.iter().filter(|e| e.flipped).count()
    }
}

impl Oracle for SessionOracle {
    fn answer(&mut self, i: usize, j: usize) -> Result<Answer, OracleError> {
        let (answer, flipped) = match &mut self.source {
            Source::GroundTruth { labels } => (truth(labels, i, j)?, false),
            Source::Noisy { labels, rate, rng } => {
                let t = truth(labels, i, j)?;
                let flipped = rng.random::<f64>() < *rate;
                (if flipped { flip(t) } else { t }, flipped)
            }
            Source::Interactive { supplied } => match *supplied {
                Some((a, b, ans)) if (a, b) == (i, j) || (a, b) == (j, i) => {
                    *supplied = None;
                    (ans, false)
                }
                _ => return Err(OracleError::Pending(i, j)),
            },
        };
        self.log.push(LoggedAnswer { i, j, answer, flipped });
        Ok(answer)
    }
}

/// Answers from a fixed log, for auditing and replaying sessions.
#[derive(Debug, Clone)]
pub struct ReplayOracle<'a> {
    log: &'a [LoggedAnswer],
}

impl<'a> ReplayOracle<'a> {
    pub fn new(log: &'a [LoggedAnswer]) -> Self {
        Self { log }
    }
}

impl Oracle for ReplayOracle<'_> {
    fn answer(&mut self, i: usize, j: usize) -> Result<Answer, OracleError> {
        replay(self.log, i, j).map_err(|e| OracleError::Unavailable(alloc::format!("{e}")))
    }
}
