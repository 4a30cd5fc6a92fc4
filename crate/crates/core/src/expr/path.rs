//! Addressing subtrees by child-index paths.

use super::Expr;

impl Expr {
    /// All paths in preorder; the root is the empty path.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn go(e: &Expr, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(cur.clone());
            for (i, c) in e.children().into_iter().enumerate() {
                cur.push(i);
                go(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn at(&self, path: &[usize]) -> Option<&Expr> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    /// Replaces the subtree at `path`. Sums and products are re-flattened,
    /// nothing else is simplified.
    pub fn replace_at(&self, path: &[usize], new: Expr) -> Expr {
        let Some((&i, rest)) = path.split_first() else {
            return new;
        };
        match self {
            Expr::Add(args) | Expr::Mul(args) => {
                let mut args = args.clone();
                args[i] = args[i].replace_at(rest, new);
                if matches!(self, Expr::Add(_)) {
                    Expr::add(args)
                } else {
                    Expr::mul(args)
                }
            }
            Expr::Pow(b, x) if i == 0 => Expr::pow(b.replace_at(rest, new), (**x).clone()),
            Expr::Pow(b, x) => Expr::pow((**b).clone(), x.replace_at(rest, new)),
            Expr::Fn(f, a) => Expr::func(*f, a.replace_at(rest, new)),
            leaf => leaf.clone(),
        }
    }
}
