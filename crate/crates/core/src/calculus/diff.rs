use crate::expr::{canonicalize, Expr, Func};

/// Exact derivative with respect to `x`, canonicalized.
///
/// Falls back to the raw rule output if canonicalization hits a literal
/// division by zero, so the caller still gets an expression that evaluates
/// to the same values wherever it is defined.
pub fn differentiate(e: &Expr) -> Expr {
    let raw = d(e);
    canonicalize(&raw).unwrap_or(raw)
}

fn d(e: &Expr) -> Expr {
    if !e.has_x() {
        return Expr::int(0);
    }
    match e {
        Expr::X => Expr::int(1),
        Expr::Int(_) | Expr::Rational(_) => Expr::int(0),
        Expr::Add(args) => Expr::add(args.iter().filter(|a| a.has_x()).map(d).collect()),
        Expr::Mul(args) => {
            let mut terms = Vec::new();
            for (i, a) in args.iter().enumerate() {
                if !a.has_x() {
                    continue;
                }
                let mut fs = args.clone();
                fs[i] = d(a);
                terms.push(Expr::mul(fs));
            }
            Expr::add(terms)
        }
        Expr::Pow(b, p) => {
            let (b, p) = (b.as_ref(), p.as_ref());
            if !p.has_x() {
                // p * b^(p-1) * b'
                Expr::mul(vec![
                    p.clone(),
                    Expr::pow(b.clone(), Expr::add(vec![p.clone(), Expr::int(-1)])),
                    d(b),
                ])
            } else if !b.has_x() {
                // b^p * ln(b) * p'
                Expr::mul(vec![e.clone(), Expr::ln(b.clone()), d(p)])
            } else {
                // b^p * (p' ln b + p b' / b)
                Expr::mul(vec![
                    e.clone(),
                    Expr::add(vec![
                        Expr::mul(vec![d(p), Expr::ln(b.clone())]),
                        Expr::mul(vec![p.clone(), d(b), Expr::pow(b.clone(), Expr::int(-1))]),
                    ]),
                ])
            }
        }
        Expr::Fn(f, u) => {
            let u = u.as_ref();
            let outer = match f {
                Func::Sin => Expr::cos(u.clone()),
                Func::Cos => Expr::neg(Expr::sin(u.clone())),
                Func::Tan => Expr::pow(Expr::cos(u.clone()), Expr::int(-2)),
                Func::Exp => Expr::exp(u.clone()),
                Func::Ln => Expr::pow(u.clone(), Expr::int(-1)),
                Func::Sqrt => Expr::mul(vec![
                    Expr::ratio(1, 2),
                    Expr::pow(Expr::sqrt(u.clone()), Expr::int(-1)),
                ]),
            };
            Expr::mul(vec![outer, d(u)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_infix;

    fn dd(s: &str) -> Expr {
        differentiate(&parse_infix(s).unwrap())
    }

    fn c(s: &str) -> Expr {
        canonicalize(&parse_infix(s).unwrap()).unwrap()
    }

    #[test]
    fn sine() {
        assert_eq!(dd("sin(x)"), Expr::cos(Expr::X));
    }

    #[test]
    fn table_one_first_row() {
        assert_eq!(dd("10/13*sin(39*x)"), c("30*cos(39*x)"));
    }

    #[test]
    fn table_three_caption() {
        assert_eq!(dd("x^43 + 1"), c("43*x^42"));
    }

    #[test]
    fn constants_vanish() {
        assert_eq!(dd("ln(123)*17"), Expr::int(0));
    }

    #[test]
    fn exponential_base() {
        assert_eq!(dd("123^x/ln(123)"), c("123^x"));
    }

    #[test]
    fn log_rule_and_product() {
        assert_eq!(dd("x*(ln(2*x) - 1)"), c("ln(2*x)"));
    }

    #[test]
    fn variable_base_and_exponent() {
        // d/dx x^x = x^x (ln x + 1)
        assert_eq!(dd("x^x"), c("x^x*ln(x) + x^x"));
    }
}
