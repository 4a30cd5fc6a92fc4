use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use symint::calculus::{verify_integral, EquivConfig};
use symint::metrics::{
    failure_indicator, fail_at_k, rates_from, read_records, render_summary, search_vs_model_report,
    write_records, EvalConfig, EvalRecord, ReportError,
};
use symint::model::{CandidateList, DecodeParams, Integrator, ModelError};
use symint::problemgen::{
    composition_suite, exponent_pool, integer_extrapolation_suite, perturb_suite, primitives_suite,
    random_tree_suite, read_problem_file, seed_sets, solved_subset, Perturbation, Problem, Template,
};
use symint::sagga::{
    self, read_archive, render_summaries, summarize, write_archive, Archive, ArchiveEntry, Checkpoint,
    FitnessSpec, GenerationStats, MutationConfig, Predicate, RunHooks, SaggaConfig, SaggaError, SeedItem,
};
use symint::seed::{derive, hash_str};
use symint::{canonicalize, parse_infix, to_infix, to_prefix, Expr};

use crate::backend::{self, Backend};
use crate::{Common, Failure, Family, Kind, Mutations, ReportArgs, SaggaArgs, SuiteArgs, VerifyArgs};

fn usage(flag: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{flag}: {msg}"))
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::InvalidParams(m) => Failure::Usage(m),
        other => Failure::Backend(other.to_string()),
    }
}

fn parse_range(s: &str, flag: &str) -> Result<(i64, i64), Failure> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(flag, format!("expected LO:HI, got `{s}`")))?;
    let lo = a.trim().parse().map_err(|e| usage(flag, e))?;
    let hi = b.trim().parse().map_err(|e| usage(flag, e))?;
    if lo > hi {
        return Err(usage(flag, format!("{lo} > {hi}")));
    }
    Ok((lo, hi))
}

fn parse_list<T: FromStr>(s: &str, flag: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    let v = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|e| usage(flag, format!("`{x}`: {e}"))))
        .collect::<Result<Vec<T>, _>>()?;
    if v.is_empty() {
        return Err(usage(flag, "empty list"));
    }
    Ok(v)
}

fn read_text(path: &Path, flag: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

/// Verification settings; the seed derives from the run seed.
fn equiv(c: &Common) -> Result<EquivConfig, Failure> {
    let cfg = EquivConfig {
        per_candidate_budget: c.budget,
        strict_timeout: c.strict_timeout,
        seed: derive(&[c.seed, hash_str("equiv")]),
        ..EquivConfig::default()
    };
    cfg.validate().map_err(|e| usage("--budget", e))?;
    Ok(cfg)
}

fn select(c: &Common) -> Result<Backend, Failure> {
    backend::parse(&c.model, c.seed).map_err(|e| usage("--model", e))
}

fn open(b: &Backend) -> Result<Box<dyn Integrator>, Failure> {
    b.open().map_err(model_failure)
}

fn create(path: &Path, flag: &str) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

fn templates(s: &str) -> Result<Vec<Template>, Failure> {
    s.split(',')
        .map(|t| Template::from_name(t.trim()).ok_or_else(|| usage("--templates", format!("unknown template `{t}`"))))
        .collect()
}

fn perturbation(k: Kind) -> Perturbation {
    match k {
        Kind::Divide => Perturbation::Divide,
        Kind::Scale => Perturbation::Scale,
        Kind::AddExp => Perturbation::AddExp,
        Kind::AddLn => Perturbation::AddLn,
    }
}

/// Rows of (family, k list, rates) in order of first appearance.
fn family_rows(records: &[EvalRecord], ks: &[usize], prefix: &str) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut families: Vec<&str> = Vec::new();
    for r in records {
        if !families.contains(&r.family.as_str()) {
            families.push(&r.family);
        }
    }
    let mut rows: Vec<_> = families
        .iter()
        .map(|f| {
            let group: Vec<EvalRecord> = records.iter().filter(|r| r.family == *f).cloned().collect();
            let name = if f.is_empty() { "-" } else { f };
            (format!("{prefix}{name}"), ks.to_vec(), rates_from(&group, ks))
        })
        .collect();
    if families.len() > 1 {
        rows.push((format!("{prefix}all"), ks.to_vec(), rates_from(records, ks)));
    }
    rows
}

pub fn suite(a: SuiteArgs) -> Result<(), Failure> {
    let c = &a.common;
    let backend = select(c)?;
    let ks: Vec<usize> = parse_list(&a.k, "--k")?;
    if ks.contains(&0) {
        return Err(usage("--k", "k must be at least 1"));
    }
    let eval = EvalConfig { equiv: equiv(c)?, seed: c.seed, workers: c.workers, early_stop: true };
    let params = DecodeParams { k: *ks.iter().max().unwrap(), beam: a.beam, ..DecodeParams::default() };
    let model = open(&backend)?;
    let gen = |e: symint::problemgen::GenError| Failure::Usage(e.to_string());
    let sub = |tag: u64| derive(&[c.seed, tag]);

    let problems: Vec<Problem> = match a.family {
        Family::Primitives => {
            primitives_suite(&templates(&a.templates)?, parse_range(&a.range, "--range")?, a.n, sub(1)).map_err(gen)?
        }
        Family::Perturb => {
            let base =
                primitives_suite(&templates(&a.templates)?, parse_range(&a.range, "--range")?, a.n, sub(1)).map_err(gen)?;
            let kinds = match a.kind {
                Some(k) => vec![k],
                None => vec![Kind::Divide, Kind::Scale, Kind::AddExp, Kind::AddLn],
            };
            let k_range = parse_range(&a.k_range, "--k-range")?;
            let mut out = Vec::new();
            for (i, k) in kinds.into_iter().enumerate() {
                out.extend(perturb_suite(&base, perturbation(k), k_range, sub(10 + i as u64)).map_err(gen)?);
            }
            out
        }
        Family::Compose => {
            let base =
                primitives_suite(&templates(&a.templates)?, parse_range(&a.range, "--range")?, a.n, sub(1)).map_err(gen)?;
            let pool = solved_subset(&base, model.as_ref(), &params, 1, &eval).map_err(model_failure)?;
            eprintln!("composition pool: {} of {} primitives solved at k=1", pool.len(), base.len());
            let mut out = Vec::new();
            for arity in parse_list::<usize>(&a.arity, "--arity")? {
                out.extend(composition_suite(&pool, arity, a.n, sub(20 + arity as u64)).map_err(gen)?);
            }
            out
        }
        Family::Exp => exponent_pool(),
        Family::Random => random_tree_suite(a.ops, a.n, sub(30)),
        Family::Extrapolation => {
            let buckets = a
                .buckets
                .split(',')
                .map(|b| parse_range(b, "--buckets"))
                .collect::<Result<Vec<_>, _>>()?;
            integer_extrapolation_suite(&templates(&a.templates)?, &buckets, a.n, sub(40))
                .map_err(gen)?
                .into_iter()
                .flat_map(|((lo, hi), ps)| {
                    ps.into_iter().map(move |mut p| {
                        p.family = format!("{} [{lo},{hi})", p.family);
                        p
                    })
                })
                .collect()
        }
        Family::File => {
            let path = a.problems.as_deref().ok_or_else(|| usage("--problems", "required with --family file"))?;
            read_problem_file(&read_text(path, "--problems")?)
                .map_err(|(line, e)| usage("--problems", format!("line {}: {e}", line + 1)))?
        }
    };
    if problems.is_empty() {
        return Err(usage("--family", "the suite is empty"));
    }
    eprintln!("{} problems, model {}", problems.len(), model.describe());

    let report = fail_at_k(&problems, model.as_ref(), &params, &ks, &eval).map_err(model_failure)?;
    if let Some(path) = &a.out {
        let mut w = create(path, "--out")?;
        write_records(&mut w, &report)
            .and_then(|_| w.flush())
            .map_err(io_failure(path))?;
    }
    print!("{}", render_summary(&family_rows(&report.records, &ks, "")));
    println!(
        "verification {:.2} s over {} problems (worst case {:.0} s), wall {:.2} s",
        report.verify_seconds,
        problems.len(),
        report.worst_case_seconds,
        report.wall_seconds
    );
    Ok(())
}

fn read_exprs(text: &str, flag: &str) -> Result<Vec<Expr>, Failure> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_infix(l.trim()).map_err(|e| usage(flag, format!("line {}: {e}", i + 1))))
        .collect()
}

fn parse_fitness(s: &str) -> Result<FitnessSpec, Failure> {
    let spec = match s.split_once(':') {
        None if s == "short" => FitnessSpec::ShortDefault,
        None if s == "trig" => FitnessSpec::Gated(Predicate::ContainsTrig, Box::new(FitnessSpec::ShortDefault)),
        Some(("length", l)) => FitnessSpec::TargetLength(l.parse().map_err(|e| usage("--fitness", e))?),
        Some(("near", path)) => FitnessSpec::NearTargetSet(read_exprs(&read_text(Path::new(path), "--fitness")?, "--fitness")?),
        Some(("trig", inner)) => FitnessSpec::Gated(Predicate::ContainsTrig, Box::new(parse_fitness(inner)?)),
        _ => return Err(usage("--fitness", format!("expected short, length:L, near:FILE or trig[:INNER], got `{s}`"))),
    };
    spec.validate().map_err(|e| usage("--fitness", e))?;
    Ok(spec)
}

fn print_progress(s: &GenerationStats) {
    eprintln!(
        "generation {:>3}: {} children, {} failures, {} archived, {} collisions, archive {}",
        s.generation, s.children, s.failures, s.archived, s.collisions, s.archive_size
    );
}

fn growth_table(a: &Archive) -> String {
    let mut s = format!("{:>10} {:>9} {:>8} {:>12} {:>10}\n", "generation", "failures", "archived", "archive size", "mean len");
    for g in &a.progress {
        let len = g.mean_archived_len.map_or("-".to_string(), |l| format!("{l:.1}"));
        s.push_str(&format!(
            "{:>10} {:>9} {:>8} {:>12} {:>10}\n",
            g.generation, g.failures, g.archived, g.archive_size, len
        ));
    }
    s
}

fn sagga_failure(e: SaggaError) -> Failure {
    match e {
        SaggaError::Model { source, checkpoint } => Failure::Backend(match checkpoint {
            Some(p) => format!("{source}; resume with --resume {}", p.display()),
            None => source.to_string(),
        }),
        other => Failure::Usage(other.to_string()),
    }
}

pub fn sagga(a: SaggaArgs) -> Result<(), Failure> {
    let c = &a.common;
    let backend = select(c)?;
    let checkpoint: Option<PathBuf> = a
        .checkpoint
        .clone()
        .or_else(|| a.resume.clone())
        .or_else(|| a.out.as_ref().map(|o| PathBuf::from(format!("{}.ckpt", o.display()))));

    let state = match &a.resume {
        Some(path) => Checkpoint::load(path).map_err(|e| usage("--resume", e))?,
        None => {
            let fitness = parse_fitness(&a.fitness)?;
            let seeds = match seed_sets().by_name(&a.seeds) {
                Some(s) => s.to_vec(),
                None => read_exprs(&read_text(Path::new(&a.seeds), "--seeds")?, "--seeds")?,
            };
            if seeds.is_empty() {
                return Err(usage("--seeds", "no seed expressions"));
            }
            let mut mutation = match a.mutations {
                Mutations::All => MutationConfig::default(),
                Mutations::Constant => MutationConfig::constant_only((-100, 100)),
            };
            if let Some(r) = &a.int_range {
                mutation.int_range = parse_range(r, "--int-range")?;
            }
            mutation.validate().map_err(|e| usage("--mutations", e))?;
            let config = SaggaConfig {
                seed_size: a.seed_size,
                generation_size: a.generation_size,
                cluster_count: a.clusters,
                fitness_threshold: a.threshold,
                archive_target: a.archive_size,
                eval_k: a.eval_k,
                beam: a.beam,
                generation_cap: a.generations,
                run_seed: c.seed,
                workers: c.workers,
                equiv: equiv(c)?,
            };
            config.validate().map_err(sagga_failure)?;
            Checkpoint {
                config,
                mutation,
                fitness,
                next_generation: 0,
                seeds: seeds.iter().map(|e| SeedItem { expr: e.clone(), ancestor: to_infix(e) }).collect(),
                entries: vec![],
                progress: vec![],
                collisions: 0,
            }
        }
    };

    let model = match open(&backend) {
        Ok(m) => m,
        Err(Failure::Backend(msg)) => {
            return Err(Failure::Backend(match &checkpoint {
                Some(p) => {
                    state.save(p).map_err(|e| usage("--checkpoint", e))?;
                    format!("{msg}; resume with --resume {}", p.display())
                }
                None => msg,
            }));
        }
        Err(e) => return Err(e),
    };
    let progress = print_progress;
    let hooks = RunHooks { checkpoint: checkpoint.as_deref(), on_generation: Some(&progress) };
    let label = fitness_label(&state.fitness);
    let archive = sagga::resume(state, model.as_ref(), &hooks).map_err(sagga_failure)?;

    if let Some(path) = &a.out {
        let mut w = create(path, "--out")?;
        write_archive(&mut w, &archive.entries)
            .and_then(|_| w.flush())
            .map_err(io_failure(path))?;
    }
    println!(
        "status: {:?}, {} entries after {} generations, model {}",
        archive.status,
        archive.entries.len(),
        archive.generations(),
        model.describe()
    );
    print!("{}", growth_table(&archive));
    print!("{}", render_summaries(&[(label, summarize(&archive.entries, archive.generations()))]));
    Ok(())
}

fn fitness_label(f: &FitnessSpec) -> String {
    match f {
        FitnessSpec::ShortDefault => "short".into(),
        FitnessSpec::TargetLength(l) => format!("length-{l}"),
        FitnessSpec::NearTargetSet(t) => format!("near-{}", t.len()),
        FitnessSpec::Gated(Predicate::ContainsTrig, inner) => format!("trig/{}", fitness_label(inner)),
    }
}

fn load_archive(path: &Path, flag: &str) -> Result<Vec<ArchiveEntry>, Failure> {
    let f = File::open(path).map_err(|e| usage(flag, format!("{}: {e}", path.display())))?;
    read_archive(BufReader::new(f)).map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

pub fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let c = &a.common;
    let eq = equiv(c)?;
    if let Some(path) = &a.archive {
        let entries = load_archive(path, "--archive")?;
        let cfg = SaggaConfig { equiv: eq.clone(), ..SaggaConfig::default() };
        let params = DecodeParams { k: a.eval_k, beam: a.beam, ..DecodeParams::default() };
        let model = if a.requery { Some(open(&select(c)?)?) } else { None };
        let mut genuine = 0;
        for (i, e) in entries.iter().enumerate() {
            let x = e.expr().map_err(|err| usage("--archive", format!("entry {}: {err}", i + 1)))?;
            let key = to_prefix(&canonicalize(&x).unwrap_or_else(|_| x.clone()));
            let (list, k) = match &model {
                Some(m) => (m.propose(&x, &params).map_err(model_failure)?, a.eval_k),
                None => (CandidateList { candidates: e.candidates.clone(), scores: None }, e.candidates.len().max(1)),
            };
            if failure_indicator(&x, &list, k, &cfg.equiv_for(&key)) == 1 {
                genuine += 1;
            } else {
                println!("not a failure: {}", e.problem);
            }
        }
        let pct = if entries.is_empty() { 100.0 } else { 100.0 * genuine as f64 / entries.len() as f64 };
        println!("{genuine} of {} archived failures re-verified ({pct:.1}%)", entries.len());
    }
    if let Some(path) = &a.problems {
        let problems = read_problem_file(&read_text(path, "--problems")?)
            .map_err(|(line, e)| usage("--problems", format!("line {}: {e}", line + 1)))?;
        let (mut listed, mut ok) = (0, 0);
        for p in &problems {
            let Some(t) = &p.truth else { continue };
            listed += 1;
            if verify_integral(&p.expr, t, &eq).is_success() {
                ok += 1;
            } else {
                println!("incorrect: {}\t{}", to_infix(&p.expr), to_infix(t));
            }
        }
        println!(
            "{ok} of {listed} listed antiderivatives verified; {} problems without one",
            problems.len() - listed
        );
    }
    Ok(())
}

/// Splits `NAME=PATH`; a bare path is named by its file stem.
fn named(s: &str) -> (String, PathBuf) {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() => (n.to_string(), PathBuf::from(p)),
        _ => {
            let p = PathBuf::from(s);
            let n = p.file_stem().map_or_else(|| s.to_string(), |n| n.to_string_lossy().into_owned());
            (n, p)
        }
    }
}

pub fn report(a: ReportArgs) -> Result<(), Failure> {
    let c = &a.common;
    if a.records.is_empty() && a.archive.is_empty() {
        return Err(usage("--records", "give at least one --records or --archive"));
    }
    let multi = a.records.len() > 1;
    let mut backend_model: Option<Box<dyn Integrator>> = None;
    for spec in &a.records {
        let (name, path) = named(spec);
        let f = File::open(&path).map_err(|e| usage("--records", format!("{}: {e}", path.display())))?;
        let records = read_records(BufReader::new(f)).map_err(|e| usage("--records", format!("{}: {e}", path.display())))?;
        let mut ks: Vec<usize> = records.iter().flat_map(|r| r.m.iter().map(|(k, _)| *k)).collect();
        ks.sort_unstable();
        ks.dedup();
        let prefix = if multi { format!("{name}/") } else { String::new() };
        println!("{name}: {} records", records.len());
        print!("{}", render_summary(&family_rows(&records, &ks, &prefix)));

        if a.no_search || !records.iter().any(|r| r.scores.is_some()) {
            continue;
        }
        let truths: Vec<Option<Expr>> = records
            .iter()
            .map(|r| r.truth.as_deref().and_then(|t| parse_infix(t).ok()))
            .collect();
        if backend_model.is_none() {
            backend_model = Some(open(&select(c)?)?);
        }
        let model = backend_model.as_deref().unwrap();
        let params = DecodeParams::with_k(ks.last().copied().unwrap_or(1));
        match search_vs_model_report(&records, model, &params, &truths) {
            Ok(r) => print!("{}", r.render()),
            Err(ReportError::Model(e)) => return Err(model_failure(e)),
            Err(e) => eprintln!("{name}: search-vs-model report skipped: {e}"),
        }
    }
    if !a.archive.is_empty() {
        let mut rows = Vec::new();
        for spec in &a.archive {
            let (name, path) = named(spec);
            let entries = load_archive(&path, "--archive")?;
            let generations = entries.iter().map(|e| e.generation + 1).max().unwrap_or(0);
            rows.push((name, summarize(&entries, generations)));
        }
        print!("{}", render_summaries(&rows));
    }
    Ok(())
}
