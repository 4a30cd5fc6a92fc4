//! Probabilistic equivalence by evaluation at seeded random points.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_at, Expr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivConfig {
    pub sample_count: usize,
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    pub sample_domain: (f64, f64),
    pub max_retries_per_point: usize,
    /// Wall-clock budget per candidate, in seconds.
    pub per_candidate_budget: f64,
    pub seed: u64,
    /// Count budget overruns as incorrect instead of correct.
    pub strict_timeout: bool,
}

impl Default for EquivConfig {
    fn default() -> Self {
        EquivConfig {
            sample_count: 12,
            rel_tolerance: 1e-9,
            abs_tolerance: 1e-12,
            sample_domain: (-3.0, 3.0),
            max_retries_per_point: 20,
            per_candidate_budget: 1.0,
            seed: 0,
            strict_timeout: false,
        }
    }
}

impl EquivConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn budget(&self) -> Duration {
        Duration::from_secs_f64(self.per_candidate_budget.max(0.0))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sample_count < 3 {
            return Err("sample_count must be at least 3".into());
        }
        if !(self.per_candidate_budget > 0.0) {
            return Err("per_candidate_budget must be positive".into());
        }
        if !(self.sample_domain.0 < self.sample_domain.1) {
            return Err("sample_domain must be a non-empty interval".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("found only {found} of {needed} valid sample points")]
    InsufficientDomain { found: usize, needed: usize },
    #[error("equivalence check exceeded its budget")]
    Timeout,
}

/// Smallest magnitude drawn by the log-uniform half of the sampler.
const LOG_MIN: f64 = 3e-6;

/// Draws the `i`-th candidate point. Even draws are uniform on the domain,
/// odd draws are log-uniform in magnitude with a random sign, so that
/// expressions with a narrow finite window (high powers) are still hit.
fn draw(rng: &mut ChaCha8Rng, i: usize, (lo, hi): (f64, f64)) -> f64 {
    if i % 2 == 0 {
        return rng.random_range(lo..hi);
    }
    let top = lo.abs().max(hi.abs()).max(LOG_MIN * 2.0);
    let mag = (rng.random_range(LOG_MIN.ln()..top.ln())).exp();
    let v = if rng.random_bool(0.5) { mag } else { -mag };
    let v = if v < lo || v >= hi { -v } else { v };
    v.clamp(lo, hi)
}

fn close(a: f64, b: f64, cfg: &EquivConfig) -> bool {
    (a - b).abs() <= cfg.abs_tolerance + cfg.rel_tolerance * a.abs().max(b.abs())
}

/// True iff `a` and `b` agree at `sample_count` points where both are
/// defined.
///
/// Points where both values are tiny (below `1e3 * abs_tolerance`) carry no
/// information under the absolute tolerance; they are redrawn first and
/// only used when no informative point is found within the retry limit.
pub fn numeric_equiv(a: &Expr, b: &Expr, cfg: &EquivConfig) -> Result<bool, EquivError> {
    check(a, b, cfg, None)
}

pub(crate) fn check(
    a: &Expr,
    b: &Expr,
    cfg: &EquivConfig,
    deadline: Option<Instant>,
) -> Result<bool, EquivError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tiny = 1e3 * cfg.abs_tolerance;
    let mut found = 0;
    let mut draws = 0usize;
    // Redraws are pooled: a point may use retries that earlier points did
    // not need, so narrow domains still yield a full sample.
    let budget = cfg.sample_count * (cfg.max_retries_per_point + 1);
    for _ in 0..cfg.sample_count {
        let mut fallback: Option<(f64, f64)> = None;
        let mut chosen: Option<(f64, f64)> = None;
        let mut local = 0;
        while draws < budget {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(EquivError::Timeout);
            }
            let x0 = draw(&mut rng, draws, cfg.sample_domain);
            draws += 1;
            local += 1;
            let (Ok(va), Ok(vb)) = (eval_at(a, x0), eval_at(b, x0)) else {
                continue;
            };
            if va.abs().max(vb.abs()) < tiny {
                fallback.get_or_insert((va, vb));
                if local > cfg.max_retries_per_point {
                    break;
                }
                continue;
            }
            chosen = Some((va, vb));
            break;
        }
        let Some((va, vb)) = chosen.or(fallback) else {
            continue;
        };
        found += 1;
        if !close(va, vb, cfg) {
            return Ok(false);
        }
    }
    if found < cfg.sample_count {
        return Err(EquivError::InsufficientDomain {
            found,
            needed: cfg.sample_count,
        });
    }
    Ok(true)
}

/// Whether `e` evaluates to a finite value at any of a modest number of
/// points in the domain.
pub fn defined_somewhere(e: &Expr, cfg: &EquivConfig) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tries = cfg.sample_count * (cfg.max_retries_per_point + 1);
    (0..tries).any(|i| eval_at(e, draw(&mut rng, i, cfg.sample_domain)).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{canonicalize, parse_infix};

    fn p(s: &str) -> Expr {
        parse_infix(s).unwrap()
    }

    #[test]
    fn table_three_identity() {
        let cfg = EquivConfig::default();
        assert_eq!(numeric_equiv(&p("(x^44+x)/x"), &p("x^43+1"), &cfg), Ok(true));
    }

    #[test]
    fn different_coefficients() {
        let cfg = EquivConfig::default();
        assert_eq!(numeric_equiv(&p("43*x^42"), &p("53*x^42"), &cfg), Ok(false));
    }

    #[test]
    fn high_powers_are_distinguished() {
        let cfg = EquivConfig::default();
        assert_eq!(numeric_equiv(&p("x^209 + x^764"), &p("x^204"), &cfg), Ok(false));
        assert_eq!(numeric_equiv(&p("x^764"), &p("x^764"), &cfg), Ok(true));
    }

    #[test]
    fn nowhere_defined() {
        let cfg = EquivConfig::default();
        assert!(matches!(
            numeric_equiv(&p("ln(-1 - x^2)"), &p("x"), &cfg),
            Err(EquivError::InsufficientDomain { found: 0, .. })
        ));
        assert!(!defined_somewhere(&p("ln(-1 - x^2)"), &cfg));
        assert!(defined_somewhere(&p("ln(x)"), &cfg));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = EquivConfig::default().with_seed(99);
        let a = p("sin(x)^2 + cos(x)^2");
        let r1 = numeric_equiv(&a, &Expr::int(1), &cfg);
        let r2 = numeric_equiv(&a, &Expr::int(1), &cfg);
        assert_eq!(r1, r2);
        assert_eq!(r1, Ok(true));
    }

    #[test]
    fn canonical_form_is_equivalent() {
        let cfg = EquivConfig::default();
        for s in ["(x+1)*(x-1)*sin(x)", "x^(1/3)*x^(2/3)", "exp(2*x)*exp(-x)/x"] {
            let e = p(s);
            assert_eq!(numeric_equiv(&e, &canonicalize(&e).unwrap(), &cfg), Ok(true), "{s}");
        }
    }
}
