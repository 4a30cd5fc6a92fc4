//! Prefix token format shared with external sequence models.
//!
//! Vocabulary: `add sub mul div pow sin cos tan exp ln sqrt x INT+ INT-`
//! and the digits `0`..`9`. An integer is a sign token followed by one or
//! more digits, most significant first: `-33` is `INT- 3 3`. Rationals are
//! written `div INT± p INT+ q`. N-ary sums and products are emitted as
//! left-nested binary applications.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{Expr, Func, ParseError};

/// A raw token stream, as produced or consumed by a model.
///
/// Tokens are kept as strings so that streams containing unknown tokens
/// can still be transported and reported verbatim.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }

    pub fn from_strs(tokens: &[&str]) -> Self {
        TokenSeq(tokens.iter().map(|t| t.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn parse(&self) -> Result<Expr, ParseError> {
        parse_prefix(&self.0)
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl std::str::FromStr for TokenSeq {
    type Err = std::convert::Infallible;

    /// Splits on whitespace and commas.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(TokenSeq(
            s.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
        ))
    }
}

/// Encodes an integer as `INT±` followed by its decimal digits.
pub fn encode_int(v: &BigInt, out: &mut Vec<String>) {
    out.push(if v.is_negative() { "INT-" } else { "INT+" }.to_string());
    for d in v.abs().to_str_radix(10).chars() {
        out.push(d.to_string());
    }
}

/// Decodes a single encoded integer occupying the whole slice.
pub fn decode_int<S: AsRef<str>>(tokens: &[S]) -> Result<BigInt, ParseError> {
    let mut pos = 0;
    let v = read_int(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::TrailingTokens { pos });
    }
    Ok(v)
}

fn read_int<S: AsRef<str>>(tokens: &[S], pos: &mut usize) -> Result<BigInt, ParseError> {
    let start = *pos;
    let negative = match tokens.get(start).map(AsRef::as_ref) {
        Some("INT+") => false,
        Some("INT-") => true,
        Some(other) => {
            return Err(ParseError::UnknownToken {
                pos: start,
                token: other.to_string(),
            })
        }
        None => return Err(ParseError::Underflow { pos: start }),
    };
    *pos += 1;
    let mut digits = Vec::new();
    while let Some(t) = tokens.get(*pos) {
        let t = t.as_ref();
        if t.len() == 1 && t.as_bytes()[0].is_ascii_digit() {
            digits.push(t.as_bytes()[0] - b'0');
            *pos += 1;
        } else {
            break;
        }
    }
    if digits.is_empty() {
        return Err(if *pos >= tokens.len() {
            ParseError::Underflow { pos: *pos }
        } else {
            ParseError::MalformedInteger { pos: start }
        });
    }
    let v = BigInt::from_radix_be(Sign::Plus, &digits, 10).expect("digits are base 10");
    Ok(if negative { -v } else { v })
}

/// Parses a complete prefix stream into one expression.
///
/// `sub` and `div` are rewritten into sum/product/power form; `div` of two
/// literals folds to an exact literal.
pub fn parse_prefix<S: AsRef<str>>(tokens: &[S]) -> Result<Expr, ParseError> {
    let mut pos = 0;
    let e = parse_at(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::TrailingTokens { pos });
    }
    Ok(e)
}

fn parse_at<S: AsRef<str>>(tokens: &[S], pos: &mut usize) -> Result<Expr, ParseError> {
    let Some(tok) = tokens.get(*pos) else {
        return Err(ParseError::Underflow { pos: *pos });
    };
    let tok = tok.as_ref();
    match tok {
        "INT+" | "INT-" => return read_int(tokens, pos).map(Expr::Int),
        "x" => {
            *pos += 1;
            return Ok(Expr::X);
        }
        _ => {}
    }
    if let Some(f) = Func::from_name(tok).filter(|_| tok != "log") {
        *pos += 1;
        let arg = parse_at(tokens, pos)?;
        return Ok(Expr::func(f, arg));
    }
    let binary: fn(Expr, Expr) -> Expr = match tok {
        "add" => |a, b| Expr::add(vec![a, b]),
        "sub" => Expr::sub,
        "mul" => |a, b| Expr::mul(vec![a, b]),
        "div" => Expr::div,
        "pow" => Expr::pow,
        _ => {
            return Err(ParseError::UnknownToken {
                pos: *pos,
                token: tok.to_string(),
            })
        }
    };
    *pos += 1;
    let lhs = parse_at(tokens, pos)?;
    let rhs = parse_at(tokens, pos)?;
    Ok(binary(lhs, rhs))
}

/// Serializes an expression; the inverse of [`parse_prefix`] on flattened
/// trees.
pub fn to_prefix(e: &Expr) -> TokenSeq {
    let mut out = Vec::new();
    write_prefix(e, &mut out);
    TokenSeq(out)
}

fn write_prefix(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Int(v) => encode_int(v, out),
        Expr::Rational(r) => {
            out.push("div".into());
            encode_int(r.numer(), out);
            encode_int(r.denom(), out);
        }
        Expr::X => out.push("x".into()),
        Expr::Add(args) | Expr::Mul(args) => {
            let op = if matches!(e, Expr::Add(_)) { "add" } else { "mul" };
            for _ in 1..args.len() {
                out.push(op.into());
            }
            for a in args {
                write_prefix(a, out);
            }
        }
        Expr::Pow(b, x) => {
            out.push("pow".into());
            write_prefix(b, out);
            write_prefix(x, out);
        }
        Expr::Fn(f, a) => {
            out.push(f.name().into());
            write_prefix(a, out);
        }
    }
}

/// Number of tokens [`to_prefix`] would emit, without allocating.
pub(crate) fn prefix_len(e: &Expr) -> usize {
    fn int_len(v: &BigInt) -> usize {
        if v.is_zero() {
            2
        } else {
            1 + v.abs().to_str_radix(10).len()
        }
    }
    match e {
        Expr::Int(v) => int_len(v),
        Expr::Rational(r) => 1 + int_len(r.numer()) + int_len(r.denom()),
        Expr::X => 1,
        Expr::Add(args) | Expr::Mul(args) => {
            args.len() - 1 + args.iter().map(prefix_len).sum::<usize>()
        }
        Expr::Pow(b, x) => 1 + prefix_len(b) + prefix_len(x),
        Expr::Fn(_, a) => 1 + prefix_len(a),
    }
}
