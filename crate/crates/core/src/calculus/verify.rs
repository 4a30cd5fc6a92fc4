use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::diff::differentiate;
use super::equiv::{check, EquivConfig, EquivError};
use crate::expr::{Expr, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Correct,
    Incorrect,
    /// The budget elapsed before a decision; counted as a success.
    TimeoutCountedCorrect,
    Unparseable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// Wall-clock seconds spent on this candidate.
    pub elapsed: f64,
    /// 1-based rank of the candidate, when it was accepted from a list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_rank: Option<usize>,
    /// The budget ran out. Under strict timeouts the status is `Incorrect`.
    #[serde(default)]
    pub timed_out: bool,
}

impl Verdict {
    pub fn is_success(&self) -> bool {
        matches!(
            self.status,
            VerdictStatus::Correct | VerdictStatus::TimeoutCountedCorrect
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Candidate<'a> {
    Expr(&'a Expr),
    Tokens(&'a TokenSeq),
}

impl<'a> From<&'a Expr> for Candidate<'a> {
    fn from(e: &'a Expr) -> Self {
        Candidate::Expr(e)
    }
}

impl<'a> From<&'a TokenSeq> for Candidate<'a> {
    fn from(t: &'a TokenSeq) -> Self {
        Candidate::Tokens(t)
    }
}

/// Decides whether `candidate` is an antiderivative of `problem`.
pub fn verify_integral<'a>(
    problem: &Expr,
    candidate: impl Into<Candidate<'a>>,
    cfg: &EquivConfig,
) -> Verdict {
    let start = Instant::now();
    let deadline = start + cfg.budget();
    let done = |status, timed_out| Verdict {
        status,
        elapsed: start.elapsed().as_secs_f64(),
        candidate_rank: None,
        timed_out,
    };
    let parsed;
    let y = match candidate.into() {
        Candidate::Expr(e) => e,
        Candidate::Tokens(t) => match t.parse() {
            Ok(e) => {
                parsed = e;
                &parsed
            }
            Err(_) => return done(VerdictStatus::Unparseable, false),
        },
    };
    let dy = differentiate(y);
    match check(&dy, problem, cfg, Some(deadline)) {
        Ok(true) => done(VerdictStatus::Correct, false),
        Ok(false) | Err(EquivError::InsufficientDomain { .. }) => {
            done(VerdictStatus::Incorrect, false)
        }
        Err(EquivError::Timeout) if cfg.strict_timeout => done(VerdictStatus::Incorrect, true),
        Err(EquivError::Timeout) => done(VerdictStatus::TimeoutCountedCorrect, true),
    }
}
