//! Failure indicator, Fail@k and the model-versus-search report.

mod report;

use std::io::{self, BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{verify_integral, EquivConfig, Verdict, VerdictStatus};
use crate::expr::{to_infix, to_prefix, Expr, TokenSeq};
use crate::model::{CandidateList, DecodeParams, Integrator, ModelError};
use crate::problemgen::Problem;
use crate::seed;

pub use report::{search_vs_model_report, MassStats, ReportError, SearchReport, Unresolved};

/// Verifies candidates in rank order up to `k`.
///
/// With `early_stop` verification ends at the first success; otherwise all
/// `k` slots are checked. Returns the verdicts produced and the 1-based rank
/// of the first success.
pub fn check_candidates(
    problem: &Expr,
    candidates: &CandidateList,
    k: usize,
    cfg: &EquivConfig,
    early_stop: bool,
) -> (Vec<Verdict>, Option<usize>) {
    let mut verdicts = Vec::new();
    let mut first = None;
    for (i, c) in candidates.candidates.iter().take(k).enumerate() {
        let mut v = verify_integral(problem, c, cfg);
        if v.is_success() {
            v.candidate_rank = Some(i + 1);
            first.get_or_insert(i + 1);
        }
        verdicts.push(v);
        if early_stop && first.is_some() {
            break;
        }
    }
    (verdicts, first)
}

/// `m(x, f(x; k))`: 0 iff one of the first `k` candidates verifies.
pub fn failure_indicator(
    problem: &Expr,
    candidates: &CandidateList,
    k: usize,
    cfg: &EquivConfig,
) -> u8 {
    let (_, first) = check_candidates(problem, candidates, k, cfg, true);
    u8::from(first.is_none())
}

/// One evaluated problem. Serialized records deliberately omit timings so
/// that identical runs produce identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub problem: String,
    pub prefix: TokenSeq,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default)]
    pub family: String,
    pub candidates: Vec<TokenSeq>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    /// Statuses of the candidates that were verified, in rank order.
    pub verdicts: Vec<VerdictStatus>,
    pub first_success: Option<usize>,
    /// `(k, m)` pairs.
    pub m: Vec<(usize, u8)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub verify_seconds: f64,
}

impl EvalRecord {
    pub fn m_at(&self, k: usize) -> u8 {
        match self.first_success {
            Some(r) if r <= k => 0,
            _ => 1,
        }
    }

    pub fn candidate_list(&self) -> CandidateList {
        CandidateList {
            candidates: self.candidates.clone(),
            scores: self.scores.clone(),
        }
    }

    pub fn problem_expr(&self) -> Option<Expr> {
        self.prefix.parse().ok()
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub equiv: EquivConfig,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub early_stop: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            equiv: EquivConfig::default(),
            seed: 0,
            workers: 0,
            early_stop: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FailReport {
    pub k_list: Vec<usize>,
    pub rates: Vec<f64>,
    pub records: Vec<EvalRecord>,
    pub verify_seconds: f64,
    /// `k · t · N` for the largest `k` and budget `t`.
    pub worst_case_seconds: f64,
    pub wall_seconds: f64,
}

impl FailReport {
    pub fn rate_at(&self, k: usize) -> Option<f64> {
        self.k_list.iter().position(|&x| x == k).map(|i| self.rates[i])
    }
}

pub fn rates_from(records: &[EvalRecord], k_list: &[usize]) -> Vec<f64> {
    k_list
        .iter()
        .map(|&k| {
            let fails: usize = records.iter().map(|r| r.m_at(k) as usize).sum();
            fails as f64 / records.len().max(1) as f64
        })
        .collect()
}

pub(crate) fn pool(workers: usize) -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().expect("thread pool")
}

fn evaluate_one(
    index: usize,
    problem: &Problem,
    model: &dyn Integrator,
    params: &DecodeParams,
    k_list: &[usize],
    cfg: &EvalConfig,
) -> Result<EvalRecord, ModelError> {
    let k_max = params.k;
    let equiv = cfg.equiv.clone().with_seed(seed::derive(&[cfg.seed, index as u64]));
    let (candidates, error) = match model.propose(&problem.expr, params) {
        Ok(c) => (c, None),
        Err(e @ (ModelError::MalformedResponse(_) | ModelError::ResponseTooLarge { .. })) => {
            (CandidateList::default(), Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let start = Instant::now();
    let (verdicts, first) = check_candidates(&problem.expr, &candidates, k_max, &equiv, cfg.early_stop);
    let verify_seconds = start.elapsed().as_secs_f64();
    let mut rec = EvalRecord {
        id: index.to_string(),
        problem: to_infix(&problem.expr),
        prefix: to_prefix(&problem.expr),
        truth: problem.truth.as_ref().map(to_infix),
        family: problem.family.clone(),
        candidates: candidates.candidates,
        scores: candidates.scores,
        verdicts: verdicts.iter().map(|v| v.status).collect(),
        first_success: first,
        m: Vec::new(),
        error,
        verify_seconds,
    };
    rec.m = k_list.iter().map(|&k| (k, rec.m_at(k))).collect();
    Ok(rec)
}

/// Fail@k for every `k` in `k_list` over `problems`.
///
/// The model is asked once per problem for `max(k_list)` candidates.
/// Malformed or oversized responses count as failures for that problem;
/// `ModelUnavailable` aborts the evaluation.
pub fn fail_at_k(
    problems: &[Problem],
    model: &dyn Integrator,
    params: &DecodeParams,
    k_list: &[usize],
    cfg: &EvalConfig,
) -> Result<FailReport, ModelError> {
    if problems.is_empty() {
        return Err(ModelError::InvalidParams("no problems to evaluate".into()));
    }
    let k_max = k_list.iter().copied().max().unwrap_or(params.k).max(1);
    let params = DecodeParams {
        k: k_max,
        beam: params.beam.max(k_max),
        ..params.clone()
    };
    params.validate()?;
    let start = Instant::now();
    let results: Vec<Result<EvalRecord, ModelError>> = pool(cfg.workers).install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate_one(i, p, model, &params, k_list, cfg))
            .collect()
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(FailReport {
        k_list: k_list.to_vec(),
        rates: rates_from(&records, k_list),
        verify_seconds: records.iter().map(|r| r.verify_seconds).sum(),
        worst_case_seconds: k_max as f64 * cfg.equiv.per_candidate_budget * problems.len() as f64,
        wall_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

#[derive(Serialize, Deserialize)]
struct Header {
    header: bool,
    created_unix: u64,
    verify_seconds: f64,
    worst_case_seconds: f64,
    wall_seconds: f64,
}

/// Writes a timing header line followed by one record per line.
pub fn write_records(out: &mut impl Write, report: &FailReport) -> io::Result<()> {
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let h = Header {
        header: true,
        created_unix,
        verify_seconds: report.verify_seconds,
        worst_case_seconds: report.worst_case_seconds,
        wall_seconds: report.wall_seconds,
    };
    writeln!(out, "{}", serde_json::to_string(&h)?)?;
    for r in &report.records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// Reads records, skipping the header line.
pub fn read_records(input: impl BufRead) -> io::Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)?;
        if v.get("header").is_some() {
            continue;
        }
        out.push(serde_json::from_value(v)?);
    }
    Ok(out)
}

/// Plain-text table with one row per family and one column per `k`.
pub fn render_summary(rows: &[(String, Vec<usize>, Vec<f64>)]) -> String {
    let mut ks: Vec<usize> = rows.iter().flat_map(|(_, k, _)| k.iter().copied()).collect();
    ks.sort_unstable();
    ks.dedup();
    let width = rows.iter().map(|(n, _, _)| n.len()).max().unwrap_or(6).max(6);
    let mut s = format!("{:<width$}", "family");
    for k in &ks {
        s.push_str(&format!("  {:>8}", format!("Fail@{k}")));
    }
    s.push('\n');
    for (name, k_list, rates) in rows {
        s.push_str(&format!("{name:<width$}"));
        for k in &ks {
            match k_list.iter().position(|x| x == k) {
                Some(i) => s.push_str(&format!("  {:>7.1}%", 100.0 * rates[i])),
                None => s.push_str(&format!("  {:>8}", "-")),
            }
        }
        s.push('\n');
    }
    s
}
