use num_traits::ToPrimitive;
use thiserror::Error;

use super::{Expr, Func};

/// Cosine magnitude below which `tan` is treated as sitting on a pole.
pub const TAN_POLE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("logarithm of a non-positive value")]
    LogNonPositive,
    #[error("square root of a non-positive value")]
    SqrtNonPositive,
    #[error("tangent evaluated at a pole")]
    TanPole,
    #[error("zero raised to a negative power")]
    ZeroToNegative,
    #[error("negative base with a non-integer exponent")]
    NegativeBase,
    #[error("value is not finite")]
    NonFinite,
}

fn finite(v: f64) -> Result<f64, DomainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::NonFinite)
    }
}

/// Evaluates `e` at `x = x0` in double precision.
pub fn eval_at(e: &Expr, x0: f64) -> Result<f64, DomainError> {
    match e {
        Expr::Int(v) => finite(v.to_f64().unwrap_or(f64::INFINITY)),
        Expr::Rational(r) => finite(r.to_f64().unwrap_or(f64::NAN)),
        Expr::X => finite(x0),
        Expr::Add(args) => {
            let mut s = 0.0;
            for a in args {
                s += eval_at(a, x0)?;
            }
            finite(s)
        }
        Expr::Mul(args) => {
            let mut p = 1.0;
            for a in args {
                p *= eval_at(a, x0)?;
            }
            finite(p)
        }
        Expr::Pow(b, x) => {
            let base = eval_at(b, x0)?;
            let exp = eval_at(x, x0)?;
            pow(base, exp)
        }
        Expr::Fn(f, a) => {
            let v = eval_at(a, x0)?;
            finite(match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tan => {
                    if v.cos().abs() < TAN_POLE_EPS {
                        return Err(DomainError::TanPole);
                    }
                    v.tan()
                }
                Func::Exp => v.exp(),
                Func::Ln => {
                    if v <= 0.0 {
                        return Err(DomainError::LogNonPositive);
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    if v <= 0.0 {
                        return Err(DomainError::SqrtNonPositive);
                    }
                    v.sqrt()
                }
            })
        }
    }
}

fn pow(base: f64, exp: f64) -> Result<f64, DomainError> {
    let integral = exp.fract() == 0.0;
    if base == 0.0 && exp < 0.0 {
        return Err(DomainError::ZeroToNegative);
    }
    if base < 0.0 && !integral {
        return Err(DomainError::NegativeBase);
    }
    let v = if integral && exp.abs() <= i32::MAX as f64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    };
    finite(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_infix;

    fn ev(s: &str, x: f64) -> Result<f64, DomainError> {
        eval_at(&parse_infix(s).unwrap(), x)
    }

    #[test]
    fn square() {
        assert_eq!(ev("x^2", 3.0), Ok(9.0));
    }

    #[test]
    fn log_of_negative() {
        assert_eq!(ev("ln(x)", -1.0), Err(DomainError::LogNonPositive));
        assert_eq!(ev("sqrt(x)", -1.0), Err(DomainError::SqrtNonPositive));
        assert_eq!(ev("x^(-1)", 0.0), Err(DomainError::ZeroToNegative));
        assert_eq!(ev("x^(1/3)", -8.0), Err(DomainError::NegativeBase));
        assert_eq!(ev("exp(x)", 1000.0), Err(DomainError::NonFinite));
    }

    #[test]
    fn tan_pole() {
        assert_eq!(ev("tan(x)", std::f64::consts::FRAC_PI_2), Err(DomainError::TanPole));
    }

    #[test]
    fn exponential_base_over_log() {
        // 1/ln(123), computed independently.
        let expected = 1.0 / 123f64.ln();
        let got = ev("123^x/ln(123)", 0.0).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.207_805_8).abs() < 1e-7);
    }
}
