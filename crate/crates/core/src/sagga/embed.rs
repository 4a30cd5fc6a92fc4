//! Fixed-width structural embeddings for clustering.
//!
//! The vector concatenates an operator histogram, the tree depth, a one-hot
//! length bucket, literal-magnitude buckets and hashed prefix-token
//! bigrams, then is L2-normalized. All components are non-negative.

use num_traits::{Signed, ToPrimitive};

use crate::expr::{metrics, to_prefix, Expr, Func};
use crate::seed::hash_str;

const OPS: usize = 12;
const LEN_BUCKETS: [usize; 5] = [5, 10, 20, 40, 80];
const MAG_BUCKETS: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];
const BIGRAMS: usize = 32;

/// Embedding width.
pub const DIM: usize = OPS + 1 + LEN_BUCKETS.len() + 1 + MAG_BUCKETS.len() + 1 + BIGRAMS;

fn histogram(e: &Expr, h: &mut [f64], mags: &mut [f64]) {
    let slot = match e {
        Expr::Add(a) => {
            h[0] += (a.len() - 1) as f64;
            None
        }
        Expr::Mul(a) => {
            h[1] += (a.len() - 1) as f64;
            None
        }
        Expr::Pow(..) => Some(2),
        Expr::Fn(f, _) => Some(3 + Func::ALL.iter().position(|g| g == f).unwrap()),
        Expr::X => Some(9),
        Expr::Int(_) => Some(10),
        Expr::Rational(_) => Some(11),
    };
    if let Some(s) = slot {
        h[s] += 1.0;
    }
    if let Some(v) = e.as_literal() {
        let m = v.abs().to_f64().unwrap_or(f64::MAX);
        let b = MAG_BUCKETS.iter().position(|&t| m < t).unwrap_or(MAG_BUCKETS.len());
        mags[b] += 1.0;
    }
    for c in e.children() {
        histogram(c, h, mags);
    }
}

pub fn embed(e: &Expr) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    let mut mags = [0.0; MAG_BUCKETS.len() + 1];
    histogram(e, &mut v[..OPS], &mut mags);
    // Proportions rather than counts, so that clusters group structure
    // across sizes instead of stratifying by size.
    let total: f64 = v[..OPS].iter().sum();
    v[..OPS].iter_mut().for_each(|x| *x /= total);
    let m = metrics(e);
    v[OPS] = 0.1 * (m.depth as f64).ln();
    let lb = LEN_BUCKETS.iter().position(|&t| m.token_len <= t).unwrap_or(LEN_BUCKETS.len());
    let off = OPS + 1;
    v[off + lb] = 0.25;
    let off = off + LEN_BUCKETS.len() + 1;
    let lits: f64 = mags.iter().sum::<f64>().max(1.0);
    for (slot, c) in v[off..off + mags.len()].iter_mut().zip(mags) {
        *slot = 0.5 * c / lits;
    }
    let off = off + mags.len();
    let toks = to_prefix(e);
    let pairs = toks.len().saturating_sub(1).max(1) as f64;
    for w in toks.as_slice().windows(2) {
        let h = hash_str(&format!("{} {}", w[0], w[1]));
        v[off + (h % BIGRAMS as u64) as usize] += 1.0 / pairs;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine distance between two embeddings, in `[0, 2]`.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_infix;

    fn emb(s: &str) -> Vec<f64> {
        embed(&parse_infix(s).unwrap())
    }

    #[test]
    fn unit_norm_and_width() {
        let v = emb("2*x^42 + 22");
        assert_eq!(v.len(), DIM);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_variants_are_closer_than_other_families() {
        let a = emb("2*x^42 + 22");
        let b = emb("2*x^42 + 28");
        let c = emb("13*cos(83*x)");
        assert!(distance(&a, &b) < distance(&a, &c));
        assert!(distance(&a, &a).abs() < 1e-12);
    }

    #[test]
    fn distance_bounds() {
        let a = emb("x");
        let b = emb("sin(ln(x)) + 1/3");
        let d = distance(&a, &b);
        assert!((0.0..=2.0).contains(&d));
        assert!((distance(&[1.0, 0.0], &[-1.0, 0.0]) - 2.0).abs() < 1e-12);
    }
}
