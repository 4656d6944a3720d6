//! Yatracos sets `A = {x : p(x) > q(x)}`.

use crate::distributions::{Distribution, Domain};
use crate::error::Result;
use serde::{Deserialize, Serialize};

/// Grid resolution used to locate density crossings on continuous supports.
pub const CROSSING_GRID: usize = 4096;
const CROSSING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YatracosSet {
    /// Exact point set on a discrete support.
    Points(Vec<f64>),
    /// Disjoint sorted intervals; the outermost may be unbounded.
    Intervals(Vec<(f64, f64)>),
}

impl YatracosSet {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            YatracosSet::Points(p) => p.contains(&x),
            YatracosSet::Intervals(iv) => iv.iter().any(|&(a, b)| x > a && x < b),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            YatracosSet::Points(p) => p.is_empty(),
            YatracosSet::Intervals(iv) => iv.is_empty(),
        }
    }

    /// Probability of the set under `d`.
    pub fn mass(&self, d: &Distribution) -> f64 {
        match self {
            YatracosSet::Points(p) => p.iter().map(|&x| d.density(x)).sum(),
            YatracosSet::Intervals(iv) => iv.iter().map(|&(a, b)| d.cdf(b) - d.cdf(a)).sum(),
        }
    }

    /// Finite interval endpoints, useful as quadrature breakpoints.
    pub fn boundaries(&self) -> Vec<f64> {
        match self {
            YatracosSet::Points(_) => Vec::new(),
            YatracosSet::Intervals(iv) => {
                iv.iter().flat_map(|&(a, b)| [a, b]).filter(|x| x.is_finite()).collect()
            }
        }
    }
}

fn log_gap(p: &Distribution, q: &Distribution, x: f64) -> f64 {
    let (a, b) = (p.log_density(x), q.log_density(x));
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Computes `{p > q}`. Ties are excluded.
pub fn yatracos_set(p: &Distribution, q: &Distribution) -> Result<YatracosSet> {
    match Domain::of(&[p, q])? {
        Domain::Points(xs) => Ok(YatracosSet::Points(
            xs.into_iter().filter(|&x| p.density(x) > q.density(x)).collect(),
        )),
        Domain::Continuous { breaks } => {
            if p == q {
                return Ok(YatracosSet::Intervals(Vec::new()));
            }
            let (lo, hi) = (breaks[0], *breaks.last().unwrap());
            let grid: Vec<f64> =
                (0..=CROSSING_GRID).map(|i| lo + (hi - lo) * i as f64 / CROSSING_GRID as f64).collect();
            let inside: Vec<bool> = grid.iter().map(|&x| log_gap(p, q, x) > 0.0).collect();
            let mut crossings = Vec::new();
            for i in 0..CROSSING_GRID {
                if inside[i] != inside[i + 1] {
                    let (mut a, mut b) = (grid[i], grid[i + 1]);
                    let left = inside[i];
                    while b - a > CROSSING_TOL {
                        let m = 0.5 * (a + b);
                        if (log_gap(p, q, m) > 0.0) == left {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    crossings.push(0.5 * (a + b));
                }
            }
            let mut intervals = Vec::new();
            let mut start = if inside[0] { Some(f64::NEG_INFINITY) } else { None };
            for c in crossings {
                match start {
                    Some(s) => {
                        intervals.push((s, c));
                        start = None;
                    }
                    None => start = Some(c),
                }
            }
            if let Some(s) = start {
                intervals.push((s, f64::INFINITY));
            }
            Ok(YatracosSet::Intervals(intervals))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_pair() {
        let p = Distribution::bernoulli(0.7).unwrap();
        let q = Distribution::bernoulli(0.3).unwrap();
        assert_eq!(yatracos_set(&p, &q).unwrap(), YatracosSet::Points(vec![1.0]));
        assert!(yatracos_set(&p, &p).unwrap().is_empty());
    }

    #[test]
    fn gaussian_midpoint() {
        let p = Distribution::gaussian(0.0, 1.0).unwrap();
        let q = Distribution::gaussian(1.0, 1.0).unwrap();
        let a = yatracos_set(&p, &q).unwrap();
        let YatracosSet::Intervals(iv) = &a else { panic!() };
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].0, f64::NEG_INFINITY);
        assert!((iv[0].1 - 0.5).abs() < 1e-9);
        assert!(yatracos_set(&p, &p).unwrap().is_empty());
    }

    #[test]
    fn scale_pair_has_two_crossings() {
        let p = Distribution::gaussian(0.0, 1.0).unwrap();
        let q = Distribution::gaussian(0.0, 2.0).unwrap();
        // Crossing where x^2 (1 - 1/4) / 2 = ln 2.
        let c = (8.0 * std::f64::consts::LN_2 / 3.0).sqrt();
        let YatracosSet::Intervals(iv) = yatracos_set(&p, &q).unwrap() else { panic!() };
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 + c).abs() < 1e-9 && (iv[0].1 - c).abs() < 1e-9);
    }
}
