//! Fitness functions. Each is the failure indicator `m` times a shaping
//! term, so a problem the model solves always scores zero.

use serde::{Deserialize, Serialize};

use crate::calculus::{EquivConfig, VerdictStatus};
use crate::expr::{metrics, Expr, Func};
use crate::metrics::check_candidates;
use crate::model::{CandidateList, DecodeParams, Integrator, ModelError};

use super::embed::{distance, embed};

/// Minimum distance before inversion in [`FitnessSpec::NearTargetSet`].
pub const DISTANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    ContainsTrig,
}

impl Predicate {
    pub fn holds(self, e: &Expr) -> bool {
        match self {
            Predicate::ContainsTrig => e.contains_func(&Func::is_trig),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessSpec {
    /// `m / token_len`.
    ShortDefault,
    /// `m / |token_len - ℓ|`, with an exact match scoring `m`.
    TargetLength(usize),
    /// `m / max(min distance to a target, DISTANCE_FLOOR)`.
    NearTargetSet(Vec<Expr>),
    /// Zero unless the predicate holds, else the inner fitness.
    Gated(Predicate, Box<FitnessSpec>),
}

impl FitnessSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            FitnessSpec::ShortDefault => Ok(()),
            FitnessSpec::TargetLength(l) if *l == 0 => Err("target length must be at least 1".into()),
            FitnessSpec::TargetLength(_) => Ok(()),
            FitnessSpec::NearTargetSet(t) if t.is_empty() => Err("target set is empty".into()),
            FitnessSpec::NearTargetSet(_) => Ok(()),
            FitnessSpec::Gated(_, inner) => inner.validate(),
        }
    }

    /// Shaping term for a failing problem.
    fn shape(&self, e: &Expr, targets: &[Vec<f64>]) -> f64 {
        match self {
            FitnessSpec::ShortDefault => 1.0 / metrics(e).token_len as f64,
            FitnessSpec::TargetLength(l) => {
                let gap = metrics(e).token_len.abs_diff(*l).max(1);
                1.0 / gap as f64
            }
            FitnessSpec::NearTargetSet(_) => {
                let v = embed(e);
                let d = targets.iter().map(|t| distance(&v, t)).fold(f64::INFINITY, f64::min);
                1.0 / d.max(DISTANCE_FLOOR)
            }
            FitnessSpec::Gated(_, inner) => inner.shape(e, targets),
        }
    }

    fn gate(&self, e: &Expr) -> bool {
        match self {
            FitnessSpec::Gated(p, inner) => p.holds(e) && inner.gate(e),
            _ => true,
        }
    }

    fn targets(&self) -> Option<&[Expr]> {
        match self {
            FitnessSpec::NearTargetSet(t) => Some(t),
            FitnessSpec::Gated(_, inner) => inner.targets(),
            _ => None,
        }
    }
}

/// A spec with target embeddings computed once.
#[derive(Clone, Debug)]
pub struct PreparedFitness {
    pub spec: FitnessSpec,
    targets: Vec<Vec<f64>>,
}

impl PreparedFitness {
    pub fn new(spec: FitnessSpec) -> Result<Self, String> {
        spec.validate()?;
        let targets = spec.targets().map(|t| t.iter().map(embed).collect()).unwrap_or_default();
        Ok(PreparedFitness { spec, targets })
    }
}

/// Fitness of one problem with the evidence behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub m: u8,
    pub fitness: f64,
    pub candidates: CandidateList,
    pub verdicts: Vec<VerdictStatus>,
    /// Problems rejected by a gate skip the model call entirely.
    pub gated_out: bool,
}

/// Scores `e` with `m` taken at `params.k`. Malformed or oversized
/// responses count as failures; other model errors propagate.
pub fn evaluate(
    f: &PreparedFitness,
    e: &Expr,
    model: &dyn Integrator,
    params: &DecodeParams,
    equiv: &EquivConfig,
) -> Result<Evaluation, ModelError> {
    if !f.spec.gate(e) {
        return Ok(Evaluation {
            m: 0,
            fitness: 0.0,
            candidates: CandidateList::default(),
            verdicts: vec![],
            gated_out: true,
        });
    }
    let candidates = match model.propose(e, params) {
        Ok(c) => c,
        Err(ModelError::MalformedResponse(_) | ModelError::ResponseTooLarge { .. }) => {
            CandidateList::default()
        }
        Err(err) => return Err(err),
    };
    let (verdicts, first) = check_candidates(e, &candidates, params.k, equiv, true);
    let m = u8::from(first.is_none());
    let fitness = if m == 0 { 0.0 } else { f.spec.shape(e, &f.targets) };
    Ok(Evaluation {
        m,
        fitness,
        candidates,
        verdicts: verdicts.iter().map(|v| v.status).collect(),
        gated_out: false,
    })
}

/// Convenience wrapper returning only the score.
pub fn fitness(
    spec: &FitnessSpec,
    e: &Expr,
    model: &dyn Integrator,
    params: &DecodeParams,
    equiv: &EquivConfig,
) -> Result<f64, ModelError> {
    let prepared = PreparedFitness::new(spec.clone()).map_err(ModelError::InvalidParams)?;
    evaluate(&prepared, e, model, params, equiv).map(|ev| ev.fitness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_infix, TokenSeq};
    use crate::model::ReferenceModel;

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

    fn fit(spec: FitnessSpec, s: &str, model: &dyn Integrator) -> f64 {
        fitness(&spec, &parse_infix(s).unwrap(), model, &DecodeParams::default(), &EquivConfig::default()).unwrap()
    }

    #[test]
    fn short_default_five_tokens() {
        // add x INT+ 1 2
        assert_eq!(metrics(&parse_infix("x + 12").unwrap()).token_len, 5);
        assert_eq!(fit(FitnessSpec::ShortDefault, "x + 12", &AlwaysWrong), 0.2);
    }

    #[test]
    fn solved_problem_scores_zero() {
        for spec in [
            FitnessSpec::ShortDefault,
            FitnessSpec::TargetLength(10),
            FitnessSpec::NearTargetSet(vec![Expr::X]),
        ] {
            assert_eq!(fit(spec, "cos(x)", &ReferenceModel), 0.0);
        }
    }

    #[test]
    fn target_length_twelve_tokens() {
        let e = parse_infix("2*x^42 + 21").unwrap();
        assert_eq!(metrics(&e).token_len, 12);
        assert_eq!(fit(FitnessSpec::TargetLength(10), "2*x^42 + 21", &AlwaysWrong), 0.5);
        assert_eq!(fit(FitnessSpec::TargetLength(12), "2*x^42 + 21", &AlwaysWrong), 1.0);
    }

    #[test]
    fn near_target_uses_floor() {
        let spec = FitnessSpec::NearTargetSet(vec![parse_infix("x + 12").unwrap()]);
        assert_eq!(fit(spec.clone(), "x + 12", &AlwaysWrong), 1.0 / DISTANCE_FLOOR);
        assert!(fit(spec, "sin(x)", &AlwaysWrong) < 1e3);
    }

    #[test]
    fn trig_gate() {
        let spec = FitnessSpec::Gated(Predicate::ContainsTrig, Box::new(FitnessSpec::ShortDefault));
        assert_eq!(fit(spec.clone(), "x + 12", &AlwaysWrong), 0.0);
        assert!(fit(spec, "sin(x)", &AlwaysWrong) > 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(FitnessSpec::TargetLength(0).validate().is_err());
        assert!(FitnessSpec::NearTargetSet(vec![]).validate().is_err());
    }
}
