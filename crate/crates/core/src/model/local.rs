use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use super::{dedup_key, CandidateList, DecodeParams, Integrator, ModelError};
use crate::expr::{canonicalize, to_prefix, Expr, TokenSeq};
use crate::oracle::{faulty_integrate, integrate_reference, FaultSpec};
use crate::seed;

/// Canonical prefix text of a problem, or its raw prefix when it does not
/// canonicalize.
pub(crate) fn problem_key(problem: &Expr) -> String {
    match canonicalize(problem) {
        Ok(c) => to_prefix(&c).to_string(),
        Err(_) => to_prefix(problem).to_string(),
    }
}

/// The rule-based integrator wrapped as a model: one candidate when the
/// problem is in the supported class, none otherwise. Cannot score.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceModel;

impl Integrator for ReferenceModel {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        params.validate()?;
        let found: Vec<Expr> = integrate_reference(problem).into_iter().collect();
        Ok(CandidateList::from_exprs(&found, params.k))
    }

    fn score(&self, _: &Expr, _: &TokenSeq, _: &DecodeParams) -> Result<Option<f64>, ModelError> {
        Ok(None)
    }

    fn describe(&self) -> String {
        "reference".into()
    }
}

/// Seeded fault-injecting model with rank-decayed geometric scores.
///
/// The stream for a problem is derived from the spec seed and the
/// problem's canonical prefix, so answers do not depend on call order.
#[derive(Clone, Debug)]
pub struct FaultyModel {
    pub spec: FaultSpec,
}

impl FaultyModel {
    pub fn new(spec: FaultSpec) -> Self {
        FaultyModel { spec }
    }

    fn stream_seed(&self, problem: &Expr) -> u64 {
        seed::derive(&[self.spec.seed, seed::hash_str(&problem_key(problem))])
    }
}

impl Integrator for FaultyModel {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        params.validate()?;
        Ok(faulty_integrate(problem, &self.spec, self.stream_seed(problem), params.k))
    }

    /// Score of the candidate's rank in the full beam, or the score one rank
    /// below the last beam entry when it is not listed.
    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError> {
        let width = params.beam.max(params.k);
        let list = faulty_integrate(problem, &self.spec, self.stream_seed(problem), width);
        let key = dedup_key(candidate);
        let rank = list
            .candidates
            .iter()
            .position(|c| dedup_key(c) == key)
            .map_or(list.len() + 1, |i| i + 1);
        Ok(Some(self.spec.synthetic_score(rank)))
    }

    fn describe(&self) -> String {
        format!("faulty(p={})", self.spec.default_p)
    }
}

/// Memoizes another model, keyed by canonical problem prefix and decode
/// parameters. Errors are not cached.
pub struct CachedModel<M> {
    inner: M,
    proposals: RwLock<HashMap<(String, String), CandidateList>>,
    scores: RwLock<HashMap<(String, String, TokenSeq), Option<f64>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<M: Integrator> CachedModel<M> {
    pub fn new(inner: M) -> Self {
        CachedModel {
            inner,
            proposals: RwLock::default(),
            scores: RwLock::default(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// (hits, misses)
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: Integrator> Integrator for CachedModel<M> {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        let key = (problem_key(problem), params.cache_key());
        if let Some(hit) = self.proposals.read().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = self.inner.propose(problem, params)?;
        self.proposals.write().unwrap().insert(key, v.clone());
        Ok(v)
    }

    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError> {
        let key = (problem_key(problem), params.cache_key(), candidate.clone());
        if let Some(hit) = self.scores.read().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(*hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = self.inner.score(problem, candidate, params)?;
        self.scores.write().unwrap().insert(key, v);
        Ok(v)
    }

    fn describe(&self) -> String {
        format!("cached({})", self.inner.describe())
    }
}
