//! Human-facing infix notation.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary | power)*     juxtaposition multiplies: 2x, 3sin(x)
//! unary   := ('-' | '+') unary | power
//! power   := primary (('^' | '**') unary)?          right associative
//! primary := integer | 'x' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | ln | log | sqrt
//! ```
//!
//! `e^u` reads as `exp(u)`. Integers are arbitrary precision; decimals are
//! rejected.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use super::{is_negative_literal, Expr, Func, ParseError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    return Err(ParseError::Syntax {
                        pos: i,
                        msg: "decimal literals are not supported".into(),
                    });
                }
                out.push((start, Tok::Num(src[start..i].parse().expect("ascii digits"))));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_ascii_lowercase())));
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                i += 1;
                Tok::Caret
            }
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {:?}", c as char),
                })
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.term()?;
                acc = Expr::add(vec![acc, rhs]);
            } else if self.eat(&Tok::Minus) {
                let rhs = self.term()?;
                acc = Expr::sub(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.unary()?;
                acc = Expr::mul(vec![acc, rhs]);
            } else if self.eat(&Tok::Slash) {
                let rhs = self.unary()?;
                acc = Expr::div(acc, rhs);
            } else if matches!(self.peek(), Some(Tok::Num(_) | Tok::Ident(_) | Tok::LParen)) {
                let rhs = self.power()?;
                acc = Expr::mul(vec![acc, rhs]);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::neg(self.unary()?));
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Ident("e".into())) {
            self.pos += 1;
            if self.eat(&Tok::Caret) {
                return Ok(Expr::exp(self.unary()?));
            }
            return Ok(Expr::exp(Expr::int(1)));
        }
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) if name == "x" => {
                self.pos += 1;
                Ok(Expr::X)
            }
            Tok::Ident(name) => {
                let Some(f) = Func::from_name(&name) else {
                    return self.err(format!("unknown identifier {name:?}"));
                };
                self.pos += 1;
                if !self.eat(&Tok::LParen) {
                    return self.err(format!("expected '(' after {name}"));
                }
                let arg = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                Ok(Expr::func(f, arg))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                Ok(inner)
            }
            _ => self.err("expected a number, x, a function or '('"),
        }
    }
}

pub fn parse_infix(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

/// Prints with minimal parentheses, re-sugaring subtraction and division.
pub fn to_infix(e: &Expr) -> String {
    render(e).0
}

fn wrap(e: &Expr, min_prec: u8) -> String {
    let (s, p) = render(e);
    if p < min_prec {
        format!("({s})")
    } else {
        s
    }
}

fn literal_str(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn render(e: &Expr) -> (String, u8) {
    match e {
        Expr::Int(v) => (v.to_string(), if v.is_negative() { PREC_MUL } else { PREC_ATOM }),
        Expr::Rational(r) => (literal_str(r), PREC_MUL),
        Expr::X => ("x".into(), PREC_ATOM),
        Expr::Fn(f, a) => (format!("{}({})", f.name(), to_infix(a)), PREC_ATOM),
        Expr::Pow(b, x) => {
            if let Some(n) = x.as_literal().filter(|n| n.is_negative()) {
                let pos = Expr::literal(-n);
                let den = if pos.is_one() {
                    wrap(b, PREC_POW)
                } else {
                    format!("{}^{}", wrap(b, PREC_ATOM), wrap_exponent(&pos))
                };
                return (format!("1/{den}"), PREC_MUL);
            }
            (
                format!("{}^{}", wrap(b, PREC_ATOM), wrap_exponent(x)),
                PREC_POW,
            )
        }
        Expr::Mul(args) => render_mul(args),
        Expr::Add(args) => render_add(args),
    }
}

fn wrap_exponent(x: &Expr) -> String {
    if is_negative_literal(x) {
        format!("({})", to_infix(x))
    } else {
        wrap(x, PREC_POW)
    }
}

fn render_mul(args: &[Expr]) -> (String, u8) {
    let mut coeff = BigRational::one();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for a in args {
        match a {
            Expr::Int(_) | Expr::Rational(_) => coeff *= a.as_literal().unwrap(),
            Expr::Pow(b, x) if is_negative_literal(x) => {
                let n = -x.as_literal().unwrap();
                den.push(if n.is_one() {
                    (**b).clone()
                } else {
                    Expr::pow((**b).clone(), Expr::literal(n))
                });
            }
            other => num.push(other.clone()),
        }
    }
    let negative = coeff.is_negative();
    let coeff = coeff.abs();
    let mut num_parts: Vec<String> = Vec::new();
    if !den.is_empty() && !coeff.denom().is_one() {
        den.insert(0, Expr::Int(coeff.denom().clone()));
        if !coeff.numer().is_one() || num.is_empty() {
            num_parts.push(coeff.numer().to_string());
        }
    } else if !coeff.is_one() || (num.is_empty() && !den.is_empty()) || (num.is_empty() && den.is_empty()) {
        num_parts.push(literal_str(&coeff));
    }
    num_parts.extend(num.iter().map(|f| wrap(f, PREC_MUL)));
    let mut s = num_parts.join("*");
    if !den.is_empty() {
        let d = if den.len() == 1 {
            wrap(&den[0], PREC_POW)
        } else {
            format!(
                "({})",
                den.iter().map(|f| wrap(f, PREC_MUL)).collect::<Vec<_>>().join("*")
            )
        };
        s = format!("{s}/{d}");
    }
    if negative {
        s = format!("-{s}");
    }
    (s, PREC_MUL)
}

fn is_negative_term(t: &Expr) -> bool {
    match t {
        Expr::Mul(args) => args.iter().any(is_negative_literal),
        other => is_negative_literal(other),
    }
}

fn negate_term(t: &Expr) -> Expr {
    match t {
        Expr::Mul(args) => {
            let mut flipped = false;
            let args = args
                .iter()
                .map(|a| {
                    if !flipped && is_negative_literal(a) {
                        flipped = true;
                        Expr::literal(-a.as_literal().unwrap())
                    } else {
                        a.clone()
                    }
                })
                .collect();
            Expr::Mul(args)
        }
        other => Expr::literal(-other.as_literal().unwrap()),
    }
}

fn render_add(args: &[Expr]) -> (String, u8) {
    let mut ordered: Vec<&Expr> = args.iter().filter(|a| !a.is_literal()).collect();
    ordered.extend(args.iter().filter(|a| a.is_literal()));
    if is_negative_term(ordered[0]) {
        if let Some(i) = ordered.iter().position(|t| !t.is_literal() && !is_negative_term(t)) {
            let lead = ordered.remove(i);
            ordered.insert(0, lead);
        }
    }
    let mut s = String::new();
    for (i, t) in ordered.into_iter().enumerate() {
        if i == 0 {
            s.push_str(&wrap(t, PREC_MUL));
            continue;
        }
        if is_negative_term(t) {
            s.push_str(" - ");
            s.push_str(&wrap(&negate_term(t), PREC_MUL));
        } else {
            s.push_str(" + ");
            s.push_str(&wrap(t, PREC_MUL));
        }
    }
    (s, PREC_ADD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{canonicalize, eval_at};

    #[test]
    fn table_inputs() {
        let e = parse_infix("30*cos(39*x)").unwrap();
        assert_eq!(
            e,
            Expr::Mul(vec![
                Expr::int(30),
                Expr::cos(Expr::Mul(vec![Expr::int(39), Expr::X]))
            ])
        );
        let p = parse_infix("2*x**42 + 22").unwrap();
        assert_eq!(
            p,
            Expr::Add(vec![
                Expr::Mul(vec![Expr::int(2), Expr::pow(Expr::X, Expr::int(42))]),
                Expr::int(22)
            ])
        );
        assert_eq!(parse_infix("x").unwrap(), Expr::X);
    }

    #[test]
    fn juxtaposition_and_aliases() {
        assert_eq!(parse_infix("17cos(83x)").unwrap(), parse_infix("17*cos(83*x)").unwrap());
        assert_eq!(parse_infix("log(x)").unwrap(), Expr::ln(Expr::X));
        assert_eq!(parse_infix("e^x").unwrap(), Expr::exp(Expr::X));
        assert_eq!(parse_infix("-x^2").unwrap(), Expr::neg(Expr::pow(Expr::X, Expr::int(2))));
        assert_eq!(parse_infix("x^-1").unwrap(), Expr::pow(Expr::X, Expr::int(-1)));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert!(matches!(parse_infix("2*(x+1"), Err(ParseError::Syntax { pos: 6, .. })));
        assert!(matches!(parse_infix("sinh(x)"), Err(ParseError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_infix("1.5*x"), Err(ParseError::Syntax { pos: 1, .. })));
        assert!(matches!(parse_infix("x $ 2"), Err(ParseError::Syntax { pos: 2, .. })));
    }

    #[test]
    fn printing_resugars() {
        let show = |s: &str| to_infix(&canonicalize(&parse_infix(s).unwrap()).unwrap());
        assert_eq!(show("2*x^42 + 22"), "2*x^42 + 22");
        assert_eq!(show("10/13*sin(39*x)"), "10/13*sin(39*x)");
        assert_eq!(show("-47 + 2/x - 2/x^71"), "2/x - 2/x^71 - 47");
        assert_eq!(show("123^x/ln(123)"), "123^x/ln(123)");
        assert_eq!(show("x^(1/3)"), "x^(1/3)");
        assert_eq!(show("(-2)^x"), "(-2)^x");
        assert_eq!(show("x - 1"), "x - 1");
        assert_eq!(show("-x"), "-x");
        assert_eq!(show("x^(-2)"), "1/x^2");
    }

    #[test]
    fn printed_text_reparses_equivalently() {
        for s in [
            "2*x^42 + 22",
            "-47 + 2/x - 2/x^71",
            "x^(1/3) + x^(1/606)",
            "(2/3)^x - 1/(x*sin(x))",
            "sqrt(14 + 62/x) - 2",
            "-(x+1)^(-3)*7/9",
        ] {
            let e = parse_infix(s).unwrap();
            let back = parse_infix(&to_infix(&e)).unwrap();
            for x in [0.3, 1.7, 2.9] {
                let a = eval_at(&e, x).unwrap();
                let b = eval_at(&back, x).unwrap();
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{s} -> {}", to_infix(&e));
            }
        }
    }
}
