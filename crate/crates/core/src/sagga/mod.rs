//! SAGGA: a genetic search over equation trees that accumulates an
//! archive of verified model failures.
//!
//! Each generation mutates every seed problem, scores the children with a
//! fitness built on the failure indicator, archives the children whose
//! fitness exceeds the threshold and whose canonical form is new, then
//! chooses the next seed from the top-fitness children of each k-means
//! cluster.

mod cluster;
mod embed;
mod fitness;
mod mutate;

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{defined_somewhere, EquivConfig, VerdictStatus};
use crate::expr::{canonicalize, metrics, parse_prefix, to_infix, to_prefix, Expr, ParseError, TokenSeq};
use crate::metrics::pool;
use crate::model::{CachedModel, DecodeParams, Integrator, ModelError};
use crate::seed;

pub use cluster::{kmeans, ClusterError};
pub use embed::{distance, embed, DIM as EMBED_DIM};
pub use fitness::{evaluate, fitness, Evaluation, FitnessSpec, Predicate, PreparedFitness, DISTANCE_FLOOR};
pub use mutate::{mutate, simple_op, InternalMutation, LeafMutation, MutateError, MutationConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaggaConfig {
    /// M
    pub seed_size: usize,
    /// M′
    pub generation_size: usize,
    pub cluster_count: usize,
    /// τ
    pub fitness_threshold: f64,
    /// N
    pub archive_target: usize,
    pub eval_k: usize,
    pub beam: usize,
    pub generation_cap: usize,
    pub run_seed: u64,
    /// 0 uses every core.
    pub workers: usize,
    pub equiv: EquivConfig,
}

impl Default for SaggaConfig {
    fn default() -> Self {
        SaggaConfig {
            seed_size: 100,
            generation_size: 1000,
            cluster_count: 10,
            fitness_threshold: 0.01,
            archive_target: 1000,
            eval_k: 1,
            beam: 10,
            generation_cap: 50,
            run_seed: 0,
            workers: 0,
            equiv: EquivConfig::default(),
        }
    }
}

impl SaggaConfig {
    pub fn validate(&self) -> Result<(), SaggaError> {
        let bad = |m: &str| Err(SaggaError::InvalidConfig(m.into()));
        if self.cluster_count < 1 {
            return bad("cluster_count must be at least 1");
        }
        if self.seed_size < self.cluster_count {
            return bad("seed_size must be at least cluster_count");
        }
        if self.generation_size < self.seed_size {
            return bad("generation_size must be at least seed_size");
        }
        if !(self.fitness_threshold >= 0.0) {
            return bad("fitness_threshold must be non-negative");
        }
        if self.archive_target < 1 {
            return bad("archive_target must be at least 1");
        }
        if self.generation_cap < 1 {
            return bad("generation_cap must be at least 1");
        }
        self.params().validate()?;
        self.equiv.validate().map_err(SaggaError::InvalidConfig)
    }

    /// Equivalence settings for a problem, seeded by its canonical prefix
    /// so that re-verifying an archived entry reproduces its verdicts.
    pub fn equiv_for(&self, canonical: &TokenSeq) -> EquivConfig {
        let s = seed::derive(&[self.equiv.seed, seed::hash_str(&canonical.to_string())]);
        self.equiv.clone().with_seed(s)
    }

    pub fn params(&self) -> DecodeParams {
        DecodeParams {
            k: self.eval_k,
            beam: self.beam,
            ..DecodeParams::default()
        }
    }
}

/// A discovered failure. Serialized one per line in archive files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub problem: String,
    pub prefix: TokenSeq,
    pub token_len: usize,
    pub fitness: f64,
    pub generation: usize,
    pub cluster: usize,
    /// Candidates returned at the fitness's eval k.
    pub candidates: Vec<TokenSeq>,
    pub verdicts: Vec<VerdictStatus>,
    /// Infix of the initial seed this entry descends from.
    pub seed_ancestor: String,
}

impl ArchiveEntry {
    pub fn expr(&self) -> Result<Expr, ParseError> {
        parse_prefix(self.prefix.as_slice())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    GenerationCapReached,
}

/// Progress for one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub children: usize,
    /// Mutation produced no valid child.
    pub invalid: usize,
    /// Undefined at every sampled point.
    pub undefined: usize,
    pub evaluated: usize,
    pub failures: usize,
    pub archived: usize,
    /// Children above threshold whose canonical form was already archived.
    pub collisions: usize,
    pub archive_size: usize,
    /// Mean token length of entries archived this generation.
    pub mean_archived_len: Option<f64>,
    pub mean_seed_len: f64,
    pub best_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub entries: Vec<ArchiveEntry>,
    pub progress: Vec<GenerationStats>,
    pub status: RunStatus,
    pub collisions: usize,
}

impl Archive {
    pub fn generations(&self) -> usize {
        self.progress.len()
    }
}

#[derive(Debug, Error)]
pub enum SaggaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("seed set is empty")]
    EmptySeed,
    #[error("{source}; resumable checkpoint: {checkpoint:?}")]
    Model {
        source: ModelError,
        checkpoint: Option<PathBuf>,
    },
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

impl From<ModelError> for SaggaError {
    fn from(source: ModelError) -> Self {
        SaggaError::Model { source, checkpoint: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedItem {
    pub expr: Expr,
    pub ancestor: String,
}

/// Loop state written after every generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: SaggaConfig,
    pub mutation: MutationConfig,
    pub fitness: FitnessSpec,
    pub next_generation: usize,
    pub seeds: Vec<SeedItem>,
    pub entries: Vec<ArchiveEntry>,
    pub progress: Vec<GenerationStats>,
    pub collisions: usize,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self, SaggaError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SaggaError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), SaggaError> {
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string(self).map_err(|e| SaggaError::Format(e.to_string()))?;
        fs::write(&tmp, text)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Optional side channels of a run.
#[derive(Default)]
pub struct RunHooks<'a> {
    pub checkpoint: Option<&'a Path>,
    pub on_generation: Option<&'a (dyn Fn(&GenerationStats) + Sync)>,
}

enum Child {
    Invalid,
    Undefined,
    Scored {
        expr: Expr,
        key: TokenSeq,
        ancestor: String,
        eval: Evaluation,
    },
}

/// Runs the search from `seeds` until the archive holds `archive_target`
/// entries or `generation_cap` generations have run.
pub fn run(
    cfg: &SaggaConfig,
    mcfg: &MutationConfig,
    fspec: &FitnessSpec,
    seeds: &[Expr],
    model: &dyn Integrator,
) -> Result<Archive, SaggaError> {
    run_with(cfg, mcfg, fspec, seeds, model, &RunHooks::default())
}

pub fn run_with(
    cfg: &SaggaConfig,
    mcfg: &MutationConfig,
    fspec: &FitnessSpec,
    seeds: &[Expr],
    model: &dyn Integrator,
    hooks: &RunHooks,
) -> Result<Archive, SaggaError> {
    if seeds.is_empty() {
        return Err(SaggaError::EmptySeed);
    }
    let state = Checkpoint {
        config: cfg.clone(),
        mutation: mcfg.clone(),
        fitness: fspec.clone(),
        next_generation: 0,
        seeds: seeds
            .iter()
            .map(|e| SeedItem { expr: e.clone(), ancestor: to_infix(e) })
            .collect(),
        entries: vec![],
        progress: vec![],
        collisions: 0,
    };
    drive(state, model, hooks)
}

/// Continues a run from a checkpoint written by an earlier call.
pub fn resume(state: Checkpoint, model: &dyn Integrator, hooks: &RunHooks) -> Result<Archive, SaggaError> {
    drive(state, model, hooks)
}

fn drive(mut state: Checkpoint, model: &dyn Integrator, hooks: &RunHooks) -> Result<Archive, SaggaError> {
    let cfg = state.config.clone();
    cfg.validate()?;
    state.mutation.validate().map_err(|e| SaggaError::InvalidConfig(e.to_string()))?;
    let prepared = PreparedFitness::new(state.fitness.clone()).map_err(SaggaError::InvalidConfig)?;
    let cached = CachedModel::new(model);
    let workers = pool(cfg.workers);
    let mut known: HashSet<TokenSeq> = state
        .entries
        .iter()
        .map(|e| canonical_key(&e.expr().expect("archived prefixes parse")))
        .collect();
    if let Some(path) = hooks.checkpoint {
        state.save(path)?;
    }

    let status = loop {
        if state.entries.len() >= cfg.archive_target {
            break RunStatus::Completed;
        }
        if state.next_generation >= cfg.generation_cap {
            break RunStatus::GenerationCapReached;
        }
        let g = state.next_generation;
        let children = workers
            .install(|| breed(&state, &prepared, &cached, &cfg, g))
            .map_err(|source| SaggaError::Model {
                source,
                checkpoint: hooks.checkpoint.map(Path::to_path_buf),
            })?;

        let mut stats = GenerationStats {
            generation: g,
            children: children.len(),
            invalid: 0,
            undefined: 0,
            evaluated: 0,
            failures: 0,
            archived: 0,
            collisions: 0,
            archive_size: 0,
            mean_archived_len: None,
            mean_seed_len: mean(state.seeds.iter().map(|s| metrics(&s.expr).token_len as f64)).unwrap_or(0.0),
            best_fitness: 0.0,
        };
        let mut evaluated = Vec::new();
        for child in children {
            match child {
                Child::Invalid => stats.invalid += 1,
                Child::Undefined => stats.undefined += 1,
                Child::Scored { expr, key, ancestor, eval } => {
                    stats.evaluated += 1;
                    stats.failures += eval.m as usize;
                    stats.best_fitness = stats.best_fitness.max(eval.fitness);
                    evaluated.push((expr, key, ancestor, eval));
                }
            }
        }

        // Highest fitness first, so a generation that fills the archive
        // keeps its best children. Ties keep child order.
        let mut rank: Vec<usize> = (0..evaluated.len())
            .filter(|&i| evaluated[i].3.fitness > cfg.fitness_threshold)
            .collect();
        rank.sort_by(|&a, &b| evaluated[b].3.fitness.total_cmp(&evaluated[a].3.fitness).then(a.cmp(&b)));
        let mut archived_lens = Vec::new();
        for i in rank {
            let (expr, key, ancestor, eval) = &evaluated[i];
            if known.contains(key) {
                stats.collisions += 1;
                continue;
            }
            if state.entries.len() >= cfg.archive_target {
                break;
            }
            known.insert(key.clone());
            let prefix = to_prefix(expr);
            archived_lens.push(prefix.len() as f64);
            state.entries.push(ArchiveEntry {
                problem: to_infix(expr),
                token_len: prefix.len(),
                prefix,
                fitness: eval.fitness,
                generation: g,
                cluster: 0,
                candidates: eval.candidates.candidates.clone(),
                verdicts: eval.verdicts.clone(),
                seed_ancestor: ancestor.clone(),
            });
            stats.archived += 1;
        }

        // Seed candidates are the distinct children.
        let mut seen = HashSet::new();
        let scored: Vec<(SeedItem, f64)> = evaluated
            .into_iter()
            .filter(|(_, key, _, _)| seen.insert(key.clone()))
            .map(|(expr, _, ancestor, eval)| (SeedItem { expr, ancestor }, eval.fitness))
            .collect();
        stats.archive_size = state.entries.len();
        stats.mean_archived_len = mean(archived_lens.into_iter());
        state.collisions += stats.collisions;

        if !scored.is_empty() {
            state.seeds = select_seeds(scored, &cfg, g);
        }
        state.next_generation = g + 1;
        if let Some(f) = hooks.on_generation {
            f(&stats);
        }
        state.progress.push(stats);
        if let Some(path) = hooks.checkpoint {
            state.save(path)?;
        }
    };

    assign_final_clusters(&mut state.entries, &cfg);
    Ok(Archive {
        entries: state.entries,
        progress: state.progress,
        status,
        collisions: state.collisions,
    })
}

fn canonical_key(e: &Expr) -> TokenSeq {
    to_prefix(&canonicalize(e).expect("archived problems canonicalize"))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Mutates every seed `⌈M′/|seed|⌉` times and scores the first `M′`
/// children. Child `i` of generation `g` draws from the stream
/// `(run seed, g, i)`, so the result does not depend on scheduling.
fn breed(
    state: &Checkpoint,
    prepared: &PreparedFitness,
    model: &dyn Integrator,
    cfg: &SaggaConfig,
    g: usize,
) -> Result<Vec<Child>, ModelError> {
    let fan = cfg.generation_size.div_ceil(state.seeds.len());
    let params = cfg.params();
    (0..cfg.generation_size)
        .into_par_iter()
        .map(|idx| {
            let parent = &state.seeds[idx / fan];
            let mut rng = seed::rng_for(&[cfg.run_seed, g as u64, idx as u64]);
            let Ok(child) = mutate(&parent.expr, &state.mutation, &mut rng) else {
                return Ok(Child::Invalid);
            };
            let Ok(canon) = canonicalize(&child) else {
                return Ok(Child::Invalid);
            };
            let key = to_prefix(&canon);
            let equiv = cfg.equiv_for(&key);
            if !defined_somewhere(&canon, &equiv) {
                return Ok(Child::Undefined);
            }
            let eval = evaluate(prepared, &child, model, &params, &equiv)?;
            Ok(Child::Scored {
                key,
                expr: child,
                ancestor: parent.ancestor.clone(),
                eval,
            })
        })
        .collect()
}

/// Top `⌈M/k⌉` children of each cluster, padded from the global ranking
/// and cut to `M`. Ties keep child order.
fn select_seeds(scored: Vec<(SeedItem, f64)>, cfg: &SaggaConfig, g: usize) -> Vec<SeedItem> {
    let k = cfg.cluster_count.min(scored.len());
    let vectors: Vec<Vec<f64>> = scored.par_iter().map(|(s, _)| embed(&s.expr)).collect();
    let mut rng = seed::rng_for(&[cfg.run_seed, g as u64, u64::MAX]);
    let labels = kmeans(&vectors, k, &mut rng).expect("k never exceeds the point count");

    let mut ranking: Vec<usize> = (0..scored.len()).collect();
    ranking.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
    let quota = cfg.seed_size.div_ceil(k);
    let mut taken = vec![0usize; k];
    let mut chosen = vec![false; scored.len()];
    let mut order = Vec::with_capacity(cfg.seed_size);
    for &i in &ranking {
        if scored[i].1 > 0.0 && taken[labels[i]] < quota {
            taken[labels[i]] += 1;
            chosen[i] = true;
            order.push(i);
        }
    }
    for &i in &ranking {
        if order.len() >= cfg.seed_size {
            break;
        }
        if !chosen[i] {
            order.push(i);
        }
    }
    // Quota overshoot is trimmed by global rank.
    let mut pos = vec![0usize; scored.len()];
    for (r, &i) in ranking.iter().enumerate() {
        pos[i] = r;
    }
    order.sort_by_key(|&i| pos[i]);
    order.truncate(cfg.seed_size);
    order.sort_unstable();
    let mut scored: Vec<Option<SeedItem>> = scored.into_iter().map(|(s, _)| Some(s)).collect();
    order.into_iter().map(|i| scored[i].take().unwrap()).collect()
}

fn assign_final_clusters(entries: &mut [ArchiveEntry], cfg: &SaggaConfig) {
    let k = cfg.cluster_count.min(entries.len());
    if k == 0 {
        return;
    }
    let vectors: Vec<Vec<f64>> = entries
        .par_iter()
        .map(|e| embed(&e.expr().expect("archived prefixes parse")))
        .collect();
    let mut rng = seed::rng_for(&[cfg.run_seed, u64::MAX]);
    let labels = kmeans(&vectors, k, &mut rng).expect("k never exceeds the entry count");
    for (e, l) in entries.iter_mut().zip(labels) {
        e.cluster = l;
    }
}

/// One JSON entry per line.
pub fn write_archive(out: &mut impl Write, entries: &[ArchiveEntry]) -> io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_archive(input: impl BufRead) -> io::Result<Vec<ArchiveEntry>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

/// Archive statistics: size, iterations, mean length, nodes, depth and term counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveSummary {
    pub size: usize,
    pub generations: usize,
    pub mean_token_len: f64,
    pub mean_nodes: f64,
    pub mean_depth: f64,
    /// Fraction of entries with 1, 2, 3 and 4+ terms.
    pub term_fractions: [f64; 4],
}

pub fn summarize(entries: &[ArchiveEntry], generations: usize) -> ArchiveSummary {
    let ms: Vec<_> = entries.iter().filter_map(|e| e.expr().ok()).map(|e| metrics(&e)).collect();
    let n = ms.len().max(1) as f64;
    let mut terms = [0.0; 4];
    for m in &ms {
        terms[m.term_count.clamp(1, 4) - 1] += 1.0 / n;
    }
    ArchiveSummary {
        size: entries.len(),
        generations,
        mean_token_len: ms.iter().map(|m| m.token_len as f64).sum::<f64>() / n,
        mean_nodes: ms.iter().map(|m| m.node_count as f64).sum::<f64>() / n,
        mean_depth: ms.iter().map(|m| m.depth as f64).sum::<f64>() / n,
        term_fractions: terms,
    }
}

/// Text table with one row per named archive.
pub fn render_summaries(rows: &[(String, ArchiveSummary)]) -> String {
    let mut s = format!(
        "{:<20} {:>6} {:>6} {:>8} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "archive", "size", "iters", "length", "nodes", "depth", "1", "2", "3", "4+"
    );
    for (name, a) in rows {
        s.push_str(&format!(
            "{:<20} {:>6} {:>6} {:>8.1} {:>7.1} {:>6.1} {:>6.2} {:>6.2} {:>6.2} {:>6.2}\n",
            name,
            a.size,
            a.generations,
            a.mean_token_len,
            a.mean_nodes,
            a.mean_depth,
            a.term_fractions[0],
            a.term_fractions[1],
            a.term_fractions[2],
            a.term_fractions[3]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CandidateList, ReferenceModel};
    use crate::problemgen::seed_sets;

    struct AlwaysWrong;

    impl Integrator for AlwaysWrong {
        fn propose(&self, _: &Expr, _: &DecodeParams) -> Result<CandidateList, ModelError> {
            Ok(CandidateList::from_exprs(&[Expr::int(0)], 1))
        }
        fn score(&self, _: &Expr, _: &TokenSeq, _: &DecodeParams) -> Result<Option<f64>, ModelError> {
            Ok(None)
        }
        fn describe(&self) -> String {
            "always-wrong".into()
        }
    }

    fn small() -> SaggaConfig {
        SaggaConfig {
            seed_size: 20,
            generation_size: 200,
            cluster_count: 4,
            archive_target: 150,
            generation_cap: 5,
            run_seed: 3,
            ..SaggaConfig::default()
        }
    }

    #[test]
    fn always_failing_model_fills_in_one_generation() {
        let a = run(&small(), &MutationConfig::default(), &FitnessSpec::ShortDefault, &seed_sets().default, &AlwaysWrong).unwrap();
        assert_eq!(a.status, RunStatus::Completed);
        assert_eq!(a.generations(), 1);
        assert_eq!(a.entries.len(), 150);
        let keys: HashSet<_> = a.entries.iter().map(|e| canonical_key(&e.expr().unwrap())).collect();
        assert_eq!(keys.len(), 150);
        assert!(a.entries.iter().all(|e| e.fitness > 0.01 && e.cluster < 4));
    }

    #[test]
    fn perfect_oracle_gives_empty_archive() {
        let cfg = SaggaConfig { generation_cap: 2, ..small() };
        let mcfg = MutationConfig::constant_only((1, 50));
        let seeds = vec![crate::parse_infix("3*cos(2*x)").unwrap()];
        let a = run(&cfg, &mcfg, &FitnessSpec::ShortDefault, &seeds, &ReferenceModel).unwrap();
        assert_eq!(a.status, RunStatus::GenerationCapReached);
        assert!(a.entries.is_empty());
        assert_eq!(a.generations(), 2);
    }

    #[test]
    fn config_invariants() {
        assert!(SaggaConfig::default().validate().is_ok());
        assert!(SaggaConfig { seed_size: 5, ..SaggaConfig::default() }.validate().is_err());
        assert!(SaggaConfig { generation_size: 50, ..SaggaConfig::default() }.validate().is_err());
        assert!(SaggaConfig { fitness_threshold: -1.0, ..SaggaConfig::default() }.validate().is_err());
        assert!(SaggaConfig { archive_target: 0, ..SaggaConfig::default() }.validate().is_err());
    }

    #[test]
    fn seed_selection_respects_quota_and_size() {
        let cfg = SaggaConfig { seed_size: 4, cluster_count: 2, ..small() };
        let scored: Vec<(SeedItem, f64)> = ["x", "x + 1", "x + 2", "x + 3", "sin(cos(x))", "sin(cos(2*x))"]
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (SeedItem { expr: crate::parse_infix(s).unwrap(), ancestor: String::new() }, 10.0 - i as f64)
            })
            .collect();
        let seeds = select_seeds(scored, &cfg, 0);
        assert_eq!(seeds.len(), 4);
        assert!(seeds.iter().any(|s| s.expr.contains_func(&|_| true)));
    }

    #[test]
    fn archive_lines_round_trip() {
        let a = run(&small(), &MutationConfig::default(), &FitnessSpec::ShortDefault, &seed_sets().default, &AlwaysWrong).unwrap();
        let mut buf = Vec::new();
        write_archive(&mut buf, &a.entries).unwrap();
        assert_eq!(read_archive(&buf[..]).unwrap(), a.entries);
        let s = summarize(&a.entries, a.generations());
        assert!((s.term_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(render_summaries(&[("x".into(), s)]).contains("iters"));
    }
}
