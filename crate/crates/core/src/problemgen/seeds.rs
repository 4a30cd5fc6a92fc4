use crate::expr::{parse_infix, Expr};

/// Fixed seed lists for the genetic search.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSets {
    pub default: Vec<Expr>,
    pub poly: Vec<Expr>,
    pub trig: Vec<Expr>,
    pub trig_general: Vec<Expr>,
}

impl SeedSets {
    pub fn by_name(&self, name: &str) -> Option<&[Expr]> {
        match name {
            "default" => Some(&self.default),
            "poly" => Some(&self.poly),
            "trig" => Some(&self.trig),
            "trig_general" | "trig-general" => Some(&self.trig_general),
            _ => None,
        }
    }
}

const DEFAULT: [&str; 4] = ["1", "x", "x + 1", "x^2 + x + 1"];

const POLY: [&str; 9] = [
    "1",
    "2*x",
    "2/x",
    "2*x + 1",
    "2/x + 1",
    "2*x^2 + 2*x + 1",
    "2*x^2 + 2/x + 1",
    "2*x^3 + 2*x^2 + 1",
    "2*x^42 + 2*x^3 + 2*x^2 + 1",
];

const TRIG: [&str; 9] = [
    "17*cos(83*x)",
    "17*cos(83*x) + 1",
    "34*sin(77*x)",
    "34*sin(77*x) + 1",
    "2*cos(2*x) + 2*x",
    "2*cos(2*x) + 2*x + 1",
    "2*sin(2*x) + 2*x",
    "2*sin(2*x) + 2*x + 1",
    "2*sin(2*x)*cos(2*x)",
];

const TRIG_GENERAL: [&str; 9] = [
    "2*cos(2*x)",
    "2*cos(2*x) + 1",
    "2*sin(2*x)",
    "2*sin(2*x) + 1",
    "2*cos(2*x) + 2*x",
    "2*cos(2*x) + 2*x + 1",
    "2*sin(2*x) + 2*x",
    "2*sin(2*x) + 2*x + 1",
    "2*sin(2*x)*cos(2*x)",
];

fn parse_all(items: &[&str]) -> Vec<Expr> {
    items.iter().map(|s| parse_infix(s).expect("seed literal parses")).collect()
}

pub fn seed_sets() -> SeedSets {
    SeedSets {
        default: parse_all(&DEFAULT),
        poly: parse_all(&POLY),
        trig: parse_all(&TRIG),
        trig_general: parse_all(&TRIG_GENERAL),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_members() {
        let s = seed_sets();
        assert!(s.poly.contains(&parse_infix("2*x^42+2*x^3+2*x^2+1").unwrap()));
        assert!(s.trig.contains(&parse_infix("2*sin(2*x)*cos(2*x)").unwrap()));
        assert_eq!(s.default, parse_all(&["1", "x", "x+1", "x^2+x+1"]));
        assert_eq!((s.poly.len(), s.trig.len(), s.trig_general.len()), (9, 9, 9));
    }
}
