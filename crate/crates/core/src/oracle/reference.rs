use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::expr::{canonicalize, Expr, Func};

/// Problem family used to key per-family fault probabilities.
///
/// Classification is total: a canonical problem with two or more
/// non-constant terms is a `Sum`; a single term is classified by the shape
/// of its non-coefficient part; anything else is `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Power,
    ExpBase,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sum,
    Other,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Constant,
        Family::Power,
        Family::ExpBase,
        Family::Sin,
        Family::Cos,
        Family::Tan,
        Family::Exp,
        Family::Ln,
        Family::Sqrt,
        Family::Sum,
        Family::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Power => "power",
            Family::ExpBase => "exp_base",
            Family::Sin => "sin",
            Family::Cos => "cos",
            Family::Tan => "tan",
            Family::Exp => "exp",
            Family::Ln => "ln",
            Family::Sqrt => "sqrt",
            Family::Sum => "sum",
            Family::Other => "other",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

fn split_term(t: &Expr) -> (BigRational, Expr) {
    match t {
        Expr::Int(_) | Expr::Rational(_) => (t.as_literal().unwrap(), Expr::int(1)),
        Expr::Mul(args) if args[0].is_literal() => {
            (args[0].as_literal().unwrap(), Expr::mul(args[1..].to_vec()))
        }
        other => (BigRational::one(), other.clone()),
    }
}

fn terms(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Add(args) => args.clone(),
        other => vec![other.clone()],
    }
}

pub fn classify(problem: &Expr) -> Family {
    let Ok(c) = canonicalize(problem) else {
        return Family::Other;
    };
    let ts = terms(&c);
    let non_constant: Vec<&Expr> = ts.iter().filter(|t| !t.is_literal()).collect();
    match non_constant.len() {
        0 => Family::Constant,
        1 => {
            let (_, rest) = split_term(non_constant[0]);
            match &rest {
                Expr::X => Family::Power,
                Expr::Pow(b, p) if **b == Expr::X && p.is_literal() => Family::Power,
                Expr::Pow(b, _) if b.is_literal() => Family::ExpBase,
                Expr::Fn(f, _) => match f {
                    Func::Sin => Family::Sin,
                    Func::Cos => Family::Cos,
                    Func::Tan => Family::Tan,
                    Func::Exp => Family::Exp,
                    Func::Ln => Family::Ln,
                    Func::Sqrt => Family::Sqrt,
                },
                _ => Family::Other,
            }
        }
        _ => Family::Sum,
    }
}

/// `(a, b)` with `u = a·x + b` and `a != 0`, for canonical `u`.
fn affine(u: &Expr) -> Option<(BigRational, BigRational)> {
    let linear = |t: &Expr| -> Option<BigRational> {
        match t {
            Expr::X => Some(BigRational::one()),
            Expr::Mul(args) if args.len() == 2 && args[1] == Expr::X => args[0].as_literal(),
            _ => None,
        }
    };
    match u {
        Expr::Add(args) if args.len() == 2 => {
            let b = args[0].as_literal()?;
            Some((linear(&args[1])?, b))
        }
        other => Some((linear(other)?, BigRational::zero())),
    }
}

fn lit(r: BigRational) -> Expr {
    Expr::literal(r)
}

/// Antiderivative of one canonical coefficient-free term.
fn integrate_term(rest: &Expr) -> Option<Expr> {
    let x = Expr::X;
    match rest {
        _ if rest.is_one() => Some(x),
        Expr::X => Some(Expr::mul(vec![Expr::ratio(1, 2), Expr::pow(x, Expr::int(2))])),
        Expr::Pow(b, q) if **b == Expr::X => {
            let q = q.as_literal()?;
            if q == -BigRational::one() {
                return Some(Expr::ln(x));
            }
            let q1 = q + BigRational::one();
            Some(Expr::mul(vec![lit(q1.recip()), Expr::pow(x, lit(q1))]))
        }
        Expr::Pow(b, u) => {
            let a = b.as_int()?;
            if !a.is_positive() || a.is_one() {
                return None;
            }
            let (k, _) = affine(u)?;
            // a^u / (k ln a)
            Some(Expr::mul(vec![
                lit(k.recip()),
                rest.clone(),
                Expr::pow(Expr::ln((**b).clone()), Expr::int(-1)),
            ]))
        }
        Expr::Fn(f, u) => {
            let (a, b) = affine(u)?;
            let inv = lit(a.recip());
            let u = (**u).clone();
            Some(match f {
                Func::Sin => Expr::mul(vec![Expr::neg(inv), Expr::cos(u)]),
                Func::Cos => Expr::mul(vec![inv, Expr::sin(u)]),
                Func::Exp => Expr::mul(vec![inv, Expr::exp(u)]),
                Func::Tan => Expr::mul(vec![Expr::neg(inv), Expr::ln(Expr::cos(u))]),
                Func::Ln if b.is_zero() => {
                    Expr::mul(vec![x, Expr::add(vec![Expr::ln(u), Expr::int(-1)])])
                }
                // (u ln u - u) / a
                Func::Ln => Expr::mul(vec![
                    inv,
                    Expr::add(vec![
                        Expr::mul(vec![u.clone(), Expr::ln(u.clone())]),
                        Expr::neg(u),
                    ]),
                ]),
                // 2/(3a) · u · sqrt(u)
                Func::Sqrt => Expr::mul(vec![
                    lit(BigRational::new(2.into(), 3.into()) * a.recip()),
                    u.clone(),
                    Expr::sqrt(u),
                ]),
            })
        }
        _ => None,
    }
}

/// Rule-based antiderivative for linear combinations of the primitive
/// families; `None` outside that class.
pub fn integrate_reference(problem: &Expr) -> Option<Expr> {
    let c = canonicalize(problem).ok()?;
    let mut parts = Vec::new();
    for t in terms(&c) {
        let (coeff, rest) = split_term(&t);
        let anti = integrate_term(&rest)?;
        parts.push(Expr::mul(vec![lit(coeff), anti]));
    }
    let raw = Expr::add(parts);
    Some(canonicalize(&raw).unwrap_or(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{verify_integral, EquivConfig, VerdictStatus};
    use crate::expr::parse_infix;

    fn p(s: &str) -> Expr {
        parse_infix(s).unwrap()
    }

    fn c(s: &str) -> Expr {
        canonicalize(&p(s)).unwrap()
    }

    #[test]
    fn table_one_power() {
        assert_eq!(integrate_reference(&p("x^209")), Some(c("x^210/210")));
    }

    #[test]
    fn table_one_exponential_base() {
        assert_eq!(integrate_reference(&p("123^x")), Some(c("123^x/ln(123)")));
    }

    #[test]
    fn exploit_class_is_unsupported() {
        assert_eq!(integrate_reference(&p("169*sin(4*x)/x")), None);
        assert_eq!(integrate_reference(&p("sin(1/x)")), None);
        assert_eq!(integrate_reference(&p("x^x")), None);
    }

    #[test]
    fn cos_coefficients() {
        assert_eq!(integrate_reference(&p("30*cos(39*x)")), Some(c("10/13*sin(39*x)")));
        assert_eq!(integrate_reference(&p("17*cos(83*x)")), Some(c("17/83*sin(83*x)")));
    }

    #[test]
    fn log_and_reciprocal() {
        assert_eq!(integrate_reference(&p("3*ln(5*x)")), Some(c("3*x*(ln(5*x) - 1)")));
        assert_eq!(integrate_reference(&p("2/x")), Some(c("2*ln(x)")));
    }

    #[test]
    fn supported_class_verifies() {
        let cfg = EquivConfig::default();
        for s in [
            "7",
            "x",
            "x^(1/3) + x^(1/606)",
            "4^x + x^465 + 1",
            "5*sin(3*x + 2) - cos(x)",
            "2*tan(7*x)",
            "exp(-4*x + 1)",
            "ln(2*x + 3)",
            "sqrt(3*x + 1)",
            "9*2^(3*x)",
            "x^2 + x + 1 + exp(x) + ln(x)",
        ] {
            let e = p(s);
            let y = integrate_reference(&e).unwrap_or_else(|| panic!("{s} unsupported"));
            assert_eq!(verify_integral(&e, &y, &cfg).status, VerdictStatus::Correct, "{s} -> {y}");
        }
    }

    #[test]
    fn families() {
        assert_eq!(classify(&p("30*cos(39*x)")), Family::Cos);
        assert_eq!(classify(&p("x^209")), Family::Power);
        assert_eq!(classify(&p("x^209 + x^764")), Family::Sum);
        assert_eq!(classify(&p("123^x")), Family::ExpBase);
        assert_eq!(classify(&p("-241")), Family::Constant);
        assert_eq!(classify(&p("sin(x)*cos(x)")), Family::Other);
        assert_eq!(classify(&p("x^2 + 1")), Family::Power);
    }
}
