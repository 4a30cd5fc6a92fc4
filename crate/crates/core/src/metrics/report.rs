use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EvalRecord;
use crate::expr::{to_prefix, Expr};
use crate::model::{DecodeParams, Integrator, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("the backend cannot score sequences")]
    ScoringUnsupported,
    #[error("no ground truth for record {0}")]
    MissingTruth(String),
    #[error("record {0} has an unreadable problem")]
    UnreadableProblem(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassStats {
    pub count: usize,
    /// Mean probability of the top candidate.
    pub p_at_1: f64,
    /// Mean probability of the `k_max`-th candidate, over lists that have one.
    pub p_at_kmax: f64,
    /// Mean probability mass of the top `k_max` candidates.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unresolved {
    pub k: usize,
    pub failures: usize,
    pub unresolved: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemScores {
    pub id: String,
    pub scores: Vec<f64>,
    pub truth_score: f64,
    pub first_correct_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub k_max: usize,
    pub failures: MassStats,
    pub successes: MassStats,
    pub unresolved: Vec<Unresolved>,
    pub rows: Vec<ProblemScores>,
}

fn mass_stats(rows: &[&ProblemScores], k_max: usize) -> MassStats {
    let n = rows.len();
    if n == 0 {
        return MassStats::default();
    }
    let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    MassStats {
        count: n,
        p_at_1: mean(rows.iter().filter_map(|r| r.scores.first().copied()).collect()),
        p_at_kmax: mean(rows.iter().filter_map(|r| r.scores.get(k_max - 1).copied()).collect()),
        mass: mean(rows.iter().map(|r| r.scores.iter().take(k_max).sum()).collect()),
    }
}

/// Separates model errors from search errors.
///
/// A failure at level `k` is unresolved when the ground truth scores below
/// the candidate at rank `min(k, list length)`: even a perfect search over
/// `k` sequences would prefer that candidate. A failure with an empty list
/// has nothing to compare against and is not counted as unresolved.
/// Success and failure groups for the mass table are split at `k_max`.
pub fn search_vs_model_report(
    records: &[EvalRecord],
    model: &dyn Integrator,
    params: &DecodeParams,
    truths: &[Option<Expr>],
) -> Result<SearchReport, ReportError> {
    let mut k_list: Vec<usize> = records
        .iter()
        .flat_map(|r| r.m.iter().map(|(k, _)| *k))
        .collect();
    k_list.sort_unstable();
    k_list.dedup();
    let k_max = k_list.last().copied().unwrap_or(params.k).max(1);
    let params = DecodeParams {
        k: k_max,
        beam: params.beam.max(k_max),
        ..params.clone()
    };
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let truth = truths
            .get(i)
            .cloned()
            .flatten()
            .ok_or_else(|| ReportError::MissingTruth(rec.id.clone()))?;
        let problem = rec
            .problem_expr()
            .ok_or_else(|| ReportError::UnreadableProblem(rec.id.clone()))?;
        let scores = match &rec.scores {
            Some(s) => s.clone(),
            None => rec
                .candidates
                .iter()
                .map(|c| model.score(&problem, c, &params)?.ok_or(ReportError::ScoringUnsupported))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let truth_score = model
            .score(&problem, &to_prefix(&truth), &params)?
            .ok_or(ReportError::ScoringUnsupported)?;
        rows.push(ProblemScores {
            id: rec.id.clone(),
            scores,
            truth_score,
            first_correct_rank: rec.first_success,
        });
    }
    let unresolved = k_list
        .iter()
        .map(|&k| {
            let mut failures = 0;
            let mut unresolved = 0;
            for (rec, row) in records.iter().zip(&rows) {
                if rec.m_at(k) == 0 {
                    continue;
                }
                failures += 1;
                let n = row.scores.len().min(k);
                if n > 0 && row.truth_score < row.scores[n - 1] {
                    unresolved += 1;
                }
            }
            Unresolved {
                k,
                failures,
                unresolved,
                rate: if failures == 0 { 0.0 } else { unresolved as f64 / failures as f64 },
            }
        })
        .collect();
    let (fail_rows, ok_rows): (Vec<_>, Vec<_>) =
        records.iter().zip(&rows).partition(|(rec, _)| rec.m_at(k_max) == 1);
    fn strip<'a>(v: Vec<(&EvalRecord, &'a ProblemScores)>) -> Vec<&'a ProblemScores> {
        v.into_iter().map(|(_, r)| r).collect()
    }
    Ok(SearchReport {
        k_max,
        failures: mass_stats(&strip(fail_rows), k_max),
        successes: mass_stats(&strip(ok_rows), k_max),
        unresolved,
        rows,
    })
}

impl SearchReport {
    pub fn unresolved_at(&self, k: usize) -> Option<&Unresolved> {
        self.unresolved.iter().find(|u| u.k == k)
    }

    pub fn render(&self) -> String {
        let k = self.k_max;
        let mut s = format!(
            "{:<12}  {:>5}  {:>10}  {:>10}  {:>10}\n",
            "group", "n", "p@1", format!("p@{k}"), format!("p@{{1-{k}}}")
        );
        for (name, m) in [("failures", &self.failures), ("successes", &self.successes)] {
            s.push_str(&format!(
                "{:<12}  {:>5}  {:>10.5}  {:>10.3e}  {:>10.5}\n",
                name, m.count, m.p_at_1, m.p_at_kmax, m.mass
            ));
        }
        s.push_str(&format!("\n{:>4}  {:>12}\n", "k", "unresolved@k"));
        for u in &self.unresolved {
            s.push_str(&format!(
                "{:>4}  {:>11.1}%  ({}/{})\n",
                u.k,
                100.0 * u.rate,
                u.unresolved,
                u.failures
            ));
        }
        s
    }
}
