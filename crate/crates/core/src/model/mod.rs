//! Integrators under test: the common interface, in-process backends and a
//! client for external processes speaking the line-delimited protocol.

mod external;
mod local;
pub mod wire;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{canonicalize, to_prefix, Expr, TokenSeq};

pub use external::{ExternalModel, Transport};
pub use local::{CachedModel, FaultyModel, ReferenceModel};

/// Default cap on tokens per candidate.
pub const DEFAULT_TOKEN_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("candidate of {len} tokens exceeds the cap of {cap}")]
    ResponseTooLarge { len: usize, cap: usize },
    #[error("invalid decode parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Beam,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub k: usize,
    pub beam: usize,
    pub strategy: Strategy,
    pub temperature: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            k: 1,
            beam: 10,
            strategy: Strategy::Beam,
            temperature: 1.0,
        }
    }
}

impl DecodeParams {
    pub fn with_k(k: usize) -> Self {
        DecodeParams {
            k,
            beam: k.max(10),
            ..DecodeParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::InvalidParams("k must be at least 1".into()));
        }
        if self.strategy == Strategy::Beam && self.k > self.beam {
            return Err(ModelError::InvalidParams(format!(
                "k = {} exceeds beam width {}",
                self.k, self.beam
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(ModelError::InvalidParams("temperature must be positive".into()));
        }
        Ok(())
    }

    /// Stable textual key, used for caching.
    pub fn cache_key(&self) -> String {
        format!(
            "{}:{}:{:?}:{}",
            self.k,
            self.beam,
            self.strategy,
            self.temperature.to_bits()
        )
    }
}

/// Ranked candidate integrals, rank 1 first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub candidates: Vec<TokenSeq>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// Key under which two candidates count as duplicates: the canonical
/// prefix when the stream parses, the raw stream otherwise.
pub fn dedup_key(t: &TokenSeq) -> TokenSeq {
    match t.parse().ok().and_then(|e| canonicalize(&e).ok()) {
        Some(c) => to_prefix(&c),
        None => t.clone(),
    }
}

impl CandidateList {
    /// Validates scores, drops structural duplicates (keeping the best
    /// rank) and truncates to `k`.
    pub fn new(
        candidates: Vec<TokenSeq>,
        scores: Option<Vec<f64>>,
        k: usize,
    ) -> Result<Self, ModelError> {
        if let Some(s) = &scores {
            if s.len() != candidates.len() {
                return Err(ModelError::MalformedResponse(format!(
                    "{} scores for {} candidates",
                    s.len(),
                    candidates.len()
                )));
            }
            if s.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                return Err(ModelError::MalformedResponse("score outside (0, 1]".into()));
            }
            if s.windows(2).any(|w| w[1] > w[0]) {
                return Err(ModelError::MalformedResponse("scores not non-increasing".into()));
            }
        }
        let mut seen = HashSet::new();
        let mut keep = Vec::new();
        for (i, c) in candidates.iter().enumerate() {
            if seen.insert(dedup_key(c)) {
                keep.push(i);
            }
        }
        keep.truncate(k);
        Ok(CandidateList {
            candidates: keep.iter().map(|&i| candidates[i].clone()).collect(),
            scores: scores.map(|s| keep.iter().map(|&i| s[i]).collect()),
        })
    }

    pub fn from_exprs(exprs: &[Expr], k: usize) -> Self {
        CandidateList::new(exprs.iter().map(to_prefix).collect(), None, k)
            .expect("no scores to validate")
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn truncated(&self, k: usize) -> CandidateList {
        CandidateList {
            candidates: self.candidates.iter().take(k).cloned().collect(),
            scores: self.scores.as_ref().map(|s| s.iter().take(k).copied().collect()),
        }
    }
}

/// A model that maps a problem to ranked candidate integrals.
pub trait Integrator: Send + Sync {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError>;

    /// Sequence probability of `candidate`, or `None` when the backend
    /// cannot score.
    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError>;

    fn describe(&self) -> String;
}

impl<T: Integrator + ?Sized> Integrator for &T {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        (**self).propose(problem, params)
    }

    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError> {
        (**self).score(problem, candidate, params)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: Integrator + ?Sized> Integrator for Box<T> {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        (**self).propose(problem, params)
    }

    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError> {
        (**self).score(problem, candidate, params)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
