//! Fault injection: a seeded stand-in for a brittle neural integrator.

use std::collections::{BTreeMap, HashSet};

use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reference::{classify, integrate_reference, Family};
use crate::calculus::{verify_integral, EquivConfig};
use crate::expr::{canonicalize, to_prefix, Expr, Func, TokenSeq};
use crate::model::{dedup_key, CandidateList, DEFAULT_TOKEN_CAP};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Replace every rational literal `p/q` by its numerator `p`.
    DropDivision,
    /// Shift one literal by a small nonzero integer.
    CorruptConstant,
    /// Swap a function for another primitive's, or multiply by `x` when the
    /// integral has no function node.
    TemplateSwap,
    /// A truncated token stream that does not parse.
    GarbageTokens,
    /// A stream that runs to the token cap without closing.
    Nonterminating,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] = [
        FaultKind::DropDivision,
        FaultKind::CorruptConstant,
        FaultKind::TemplateSwap,
        FaultKind::GarbageTokens,
        FaultKind::Nonterminating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::DropDivision => "drop_division",
            FaultKind::CorruptConstant => "corrupt_constant",
            FaultKind::TemplateSwap => "template_swap",
            FaultKind::GarbageTokens => "garbage_tokens",
            FaultKind::Nonterminating => "nonterminating",
        }
    }

    pub fn from_name(s: &str) -> Option<FaultKind> {
        FaultKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultSpec {
    /// Failure probability for families without an override.
    pub default_p: f64,
    pub family_p: BTreeMap<Family, f64>,
    pub kinds: Vec<FaultKind>,
    /// 1-based rank of the correct answer on success; `None` never lists it.
    pub rank_of_correct: Option<usize>,
    pub seed: u64,
    /// Synthetic score of rank 1; rank `i` scores `top * decay^(i-1)`.
    pub score_top: f64,
    pub score_decay: f64,
    pub token_cap: usize,
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec {
            default_p: 0.0,
            family_p: BTreeMap::new(),
            kinds: vec![
                FaultKind::DropDivision,
                FaultKind::CorruptConstant,
                FaultKind::TemplateSwap,
            ],
            rank_of_correct: Some(1),
            seed: 0,
            score_top: 0.9,
            score_decay: 0.5,
            token_cap: DEFAULT_TOKEN_CAP,
        }
    }
}

impl FaultSpec {
    pub fn with_p(p: f64) -> Self {
        FaultSpec {
            default_p: p,
            ..FaultSpec::default()
        }
    }

    pub fn p_for(&self, family: Family) -> f64 {
        self.family_p.get(&family).copied().unwrap_or(self.default_p)
    }

    pub fn synthetic_score(&self, rank: usize) -> f64 {
        self.score_top * self.score_decay.powi(rank as i32 - 1)
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.default_p) || !self.family_p.values().all(|&p| ok(p)) {
            return Err("fault probabilities must lie in [0, 1]".into());
        }
        if self.kinds.is_empty() {
            return Err("at least one fault kind must be enabled".into());
        }
        if self.rank_of_correct == Some(0) {
            return Err("rank must be at least 1".into());
        }
        if !(self.score_top > 0.0 && self.score_top <= 1.0)
            || !(self.score_decay > 0.0 && self.score_decay < 1.0)
        {
            return Err("score_top must lie in (0, 1] and score_decay in (0, 1)".into());
        }
        Ok(())
    }

    /// Parses `key=value` pairs separated by commas, e.g.
    /// `p=0.5,cos=0.3,kinds=drop_division+garbage_tokens,rank=2,seed=3`.
    /// A family name as key sets that family's probability; `rank=none`
    /// never lists the correct answer.
    pub fn parse(s: &str) -> Result<FaultSpec, String> {
        let mut spec = FaultSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{key}: {e}"));
            match key {
                "p" => spec.default_p = num(value)?,
                "kinds" => {
                    spec.kinds = value
                        .split('+')
                        .map(|k| FaultKind::from_name(k).ok_or_else(|| format!("unknown fault kind `{k}`")))
                        .collect::<Result<_, _>>()?
                }
                "rank" if value == "none" => spec.rank_of_correct = None,
                "rank" => {
                    spec.rank_of_correct =
                        Some(value.parse().map_err(|e| format!("rank: {e}"))?)
                }
                "seed" => spec.seed = value.parse().map_err(|e| format!("seed: {e}"))?,
                "top" => spec.score_top = num(value)?,
                "decay" => spec.score_decay = num(value)?,
                "cap" => spec.token_cap = value.parse().map_err(|e| format!("cap: {e}"))?,
                fam => {
                    let f = Family::from_name(fam).ok_or_else(|| format!("unknown key `{fam}`"))?;
                    spec.family_p.insert(f, num(value)?);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn literal_paths(e: &Expr) -> Vec<Vec<usize>> {
    e.paths().into_iter().filter(|p| e.at(p).is_some_and(Expr::is_literal)).collect()
}

fn drop_division(r: &Expr) -> Option<Expr> {
    let mut out = r.clone();
    let mut changed = false;
    for p in literal_paths(r) {
        if let Some(Expr::Rational(q)) = r.at(&p) {
            out = out.replace_at(&p, Expr::integer(q.numer().clone()));
            changed = true;
        }
    }
    if !changed {
        // x-free reciprocal factors, e.g. the 1/ln(a) of an exponential base
        let p = r.paths().into_iter().find(|p| {
            matches!(r.at(p), Some(Expr::Pow(b, e)) if !b.has_x() && e.as_int().is_some_and(|v| *v == (-1).into()))
        })?;
        out = out.replace_at(&p, Expr::int(1));
    }
    Some(out)
}

fn corrupt_constant(r: &Expr, rng: &mut impl Rng) -> Option<Expr> {
    let paths = literal_paths(r);
    let p = paths.choose(rng)?;
    let old = r.at(p)?.as_literal()?;
    let mut delta = rng.random_range(-3i64..=2);
    if delta >= 0 {
        delta += 1;
    }
    Some(r.replace_at(p, Expr::literal(old + BigRational::from_integer(delta.into()))))
}

fn template_swap(r: &Expr, rng: &mut impl Rng) -> Expr {
    let fns: Vec<Vec<usize>> =
        r.paths().into_iter().filter(|p| matches!(r.at(p), Some(Expr::Fn(..)))).collect();
    let Some(p) = fns.choose(rng) else {
        return Expr::mul(vec![Expr::X, r.clone()]);
    };
    let Some(Expr::Fn(f, a)) = r.at(p) else { unreachable!() };
    let g = match f {
        Func::Sin => Func::Cos,
        Func::Cos => Func::Sin,
        Func::Tan | Func::Exp => Func::Sin,
        Func::Ln => Func::Exp,
        Func::Sqrt => Func::Ln,
    };
    r.replace_at(p, Expr::func(g, (**a).clone()))
}

fn garbage_tokens(r: &Expr, rng: &mut impl Rng) -> TokenSeq {
    let full = to_prefix(r).0;
    let cut = if full.len() > 1 { rng.random_range(1..full.len()) } else { 0 };
    // A trailing operator keeps the stream unparseable whether or not the
    // truncated part happened to be complete.
    let mut t: Vec<String> = full[..cut].to_vec();
    t.push("add".into());
    TokenSeq(t)
}

/// `add mul INT+ 1 0 0 ...` up to `cap` tokens: the product never receives
/// its second operand.
pub fn nonterminating_stream(cap: usize) -> TokenSeq {
    let mut t: Vec<String> = ["add", "mul", "INT+", "1"].iter().map(|s| s.to_string()).collect();
    while t.len() < cap.max(5) {
        t.push("0".into());
    }
    TokenSeq(t)
}

fn corruption(
    kind: FaultKind,
    r: &Expr,
    spec: &FaultSpec,
    rng: &mut impl Rng,
) -> Option<TokenSeq> {
    let e = match kind {
        FaultKind::DropDivision => drop_division(r)?,
        FaultKind::CorruptConstant => corrupt_constant(r, rng)?,
        FaultKind::TemplateSwap => template_swap(r, rng),
        FaultKind::GarbageTokens => return Some(garbage_tokens(r, rng)),
        FaultKind::Nonterminating => return Some(nonterminating_stream(spec.token_cap)),
    };
    let e = canonicalize(&e).ok()?;
    Some(to_prefix(&e))
}

/// Ranked candidate list for `problem` under `spec`.
///
/// Slot `i` draws from its own stream derived from `stream_seed`, so the
/// list for a smaller `n` is a prefix of the list for a larger one. On the
/// success branch the reference integral sits at `rank_of_correct`; every
/// other slot holds a corruption that is checked to be incorrect. Problems
/// outside the reference class start from the wrong guess `x·problem`.
pub fn faulty_integrate(
    problem: &Expr,
    spec: &FaultSpec,
    stream_seed: u64,
    n: usize,
) -> CandidateList {
    let reference = integrate_reference(problem);
    let supported = reference.is_some();
    let base = reference.unwrap_or_else(|| {
        let raw = Expr::mul(vec![Expr::X, problem.clone()]);
        canonicalize(&raw).unwrap_or(raw)
    });
    let p = spec.p_for(classify(problem));
    let fails = seed::rng_for(&[stream_seed, u64::MAX]).random_bool(p);
    let correct_slot = match (fails, supported, spec.rank_of_correct) {
        (false, true, Some(r)) => Some(r - 1),
        _ => None,
    };
    let check = EquivConfig::default().with_seed(seed::derive(&[stream_seed, 1]));
    let base_tokens = to_prefix(&base);
    let mut seen: HashSet<TokenSeq> = HashSet::new();
    seen.insert(dedup_key(&base_tokens));
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        if Some(slot) == correct_slot {
            out.push(base_tokens.clone());
            continue;
        }
        let mut rng = seed::rng_for(&[stream_seed, slot as u64]);
        let mut chosen = None;
        for _ in 0..8 {
            let kind = *spec.kinds.choose(&mut rng).expect("kinds validated non-empty");
            let Some(t) = corruption(kind, &base, spec, &mut rng) else {
                continue;
            };
            if seen.contains(&dedup_key(&t)) {
                continue;
            }
            if supported && verify_integral(problem, &t, &check).is_success() {
                continue;
            }
            chosen = Some(t);
            break;
        }
        // Fallback: base + j·x differs from every antiderivative by j·x.
        let t = chosen.unwrap_or_else(|| {
            let mut j = 1;
            loop {
                let e = Expr::add(vec![base.clone(), Expr::mul(vec![Expr::int(j), Expr::X])]);
                let t = to_prefix(&canonicalize(&e).unwrap_or(e));
                if !seen.contains(&dedup_key(&t)) {
                    break t;
                }
                j += 1;
            }
        });
        seen.insert(dedup_key(&t));
        out.push(t);
    }
    let scores = (1..=out.len()).map(|r| spec.synthetic_score(r)).collect();
    CandidateList {
        candidates: out,
        scores: Some(scores),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VerdictStatus;
    use crate::expr::parse_infix;

    fn p(s: &str) -> Expr {
        parse_infix(s).unwrap()
    }

    fn statuses(problem: &Expr, l: &CandidateList) -> Vec<VerdictStatus> {
        let cfg = EquivConfig::default();
        l.candidates.iter().map(|c| verify_integral(problem, c, &cfg).status).collect()
    }

    #[test]
    fn zero_probability_puts_truth_first() {
        let spec = FaultSpec::with_p(0.0);
        for (i, s) in ["17*cos(83*x)", "x^209", "3*ln(5*x)", "123^x"].iter().enumerate() {
            let e = p(s);
            let l = faulty_integrate(&e, &spec, i as u64, 5);
            let st = statuses(&e, &l);
            assert_eq!(st[0], VerdictStatus::Correct, "{s}");
            assert!(st[1..].iter().all(|v| *v != VerdictStatus::Correct), "{s}");
        }
    }

    #[test]
    fn certain_failure_with_drop_division() {
        let spec = FaultSpec {
            default_p: 1.0,
            kinds: vec![FaultKind::DropDivision],
            ..FaultSpec::default()
        };
        let e = p("17*cos(83*x)");
        let l = faulty_integrate(&e, &spec, 3, 1);
        assert_eq!(l.candidates[0], to_prefix(&canonicalize(&p("17*sin(83*x)")).unwrap()));
        assert_eq!(statuses(&e, &l), vec![VerdictStatus::Incorrect]);
    }

    #[test]
    fn garbage_and_nonterminating_do_not_parse() {
        for kind in [FaultKind::GarbageTokens, FaultKind::Nonterminating] {
            let spec = FaultSpec {
                default_p: 1.0,
                kinds: vec![kind],
                ..FaultSpec::default()
            };
            let e = p("x^2 + 3*x");
            let l = faulty_integrate(&e, &spec, 11, 1);
            assert!(l.candidates[0].parse().is_err());
        }
        assert_eq!(nonterminating_stream(512).len(), 512);
    }

    #[test]
    fn rank_placement_and_prefix_property() {
        let spec = FaultSpec {
            rank_of_correct: Some(3),
            ..FaultSpec::default()
        };
        let e = p("x^42");
        let long = faulty_integrate(&e, &spec, 5, 6);
        let short = faulty_integrate(&e, &spec, 5, 2);
        assert_eq!(&long.candidates[..2], &short.candidates[..]);
        let st = statuses(&e, &long);
        assert_eq!(st.iter().position(|s| *s == VerdictStatus::Correct), Some(2));
        let scores = long.scores.unwrap();
        assert!(scores.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn unsupported_problems_always_fail() {
        let spec = FaultSpec::with_p(0.0);
        let e = p("sin(x)/x");
        let l = faulty_integrate(&e, &spec, 0, 4);
        assert!(statuses(&e, &l).iter().all(|s| *s == VerdictStatus::Incorrect));
    }

    #[test]
    fn parse_spec() {
        let s = FaultSpec::parse("p=0.5,cos=0.3,kinds=drop_division+garbage_tokens,rank=none,seed=3")
            .unwrap();
        assert_eq!(s.default_p, 0.5);
        assert_eq!(s.p_for(Family::Cos), 0.3);
        assert_eq!(s.p_for(Family::Sin), 0.5);
        assert_eq!(s.kinds, vec![FaultKind::DropDivision, FaultKind::GarbageTokens]);
        assert_eq!(s.rank_of_correct, None);
        assert_eq!(s.seed, 3);
        assert!(FaultSpec::parse("p=1.5").is_err());
        assert!(FaultSpec::parse("bogus=1").is_err());
        assert!(FaultSpec::parse("kinds=").is_err());
    }
}
