//! Gaussian RBF kernel and its mean embeddings.

use crate::distributions::{Distribution, Domain};
use crate::error::{Error, Result};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;

/// Kernel bandwidth, either fixed or resolved from pilot data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Fixed(h) => s.serialize_f64(*h),
            Bandwidth::MedianHeuristic => s.serialize_str("median-heuristic"),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Bandwidth;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"median-heuristic\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Bandwidth, E> {
                if v > 0.0 {
                    Ok(Bandwidth::Fixed(v))
                } else {
                    Err(E::custom(format!("bandwidth must be positive, got {v}")))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Bandwidth, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Bandwidth, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Bandwidth, E> {
                match v {
                    "median-heuristic" | "median_heuristic" | "median" => Ok(Bandwidth::MedianHeuristic),
                    _ => Err(E::custom(format!("unknown bandwidth {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    GaussianRbf,
}

/// `k(x, y) = exp(-(x - y)^2 / (2 h^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default = "default_kind")]
    pub kind: KernelKind,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: Bandwidth,
}

fn default_kind() -> KernelKind {
    KernelKind::GaussianRbf
}

fn default_bandwidth() -> Bandwidth {
    Bandwidth::MedianHeuristic
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { kind: default_kind(), bandwidth: default_bandwidth() }
    }
}

/// At most this many leading observations enter the median heuristic.
const MEDIAN_POINTS: usize = 1000;

impl KernelSpec {
    pub fn rbf(h: f64) -> Self {
        Self { kind: KernelKind::GaussianRbf, bandwidth: Bandwidth::Fixed(h) }
    }

    pub fn width(&self) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(h) if h > 0.0 => Ok(h),
            Bandwidth::Fixed(h) => Err(Error::InvalidParameter(format!("kernel bandwidth {h}"))),
            Bandwidth::MedianHeuristic => Err(Error::UnresolvedBandwidth),
        }
    }

    /// Replaces a median-heuristic bandwidth by the median nonzero pairwise
    /// distance of `data` (the first 1000 points). Falls back to 1 when all
    /// points coincide.
    pub fn resolve(&self, data: &[f64]) -> KernelSpec {
        match self.bandwidth {
            Bandwidth::Fixed(_) => *self,
            Bandwidth::MedianHeuristic => {
                let xs = &data[..data.len().min(MEDIAN_POINTS)];
                let mut d: Vec<f64> = Vec::with_capacity(xs.len() * xs.len() / 2);
                for i in 0..xs.len() {
                    for j in i + 1..xs.len() {
                        let v = (xs[i] - xs[j]).abs();
                        if v > 0.0 {
                            d.push(v);
                        }
                    }
                }
                let h = if d.is_empty() {
                    1.0
                } else {
                    let mid = d.len() / 2;
                    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
                    *m
                };
                KernelSpec { kind: self.kind, bandwidth: Bandwidth::Fixed(h) }
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let h = self.width()?;
        Ok((-(x - y).powi(2) / (2.0 * h * h)).exp())
    }
}

/// `E k(X, Y)` for a Gaussian component pair with the RBF kernel.
fn gauss_pair(h: f64, m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let v = h * h + s1 * s1 + s2 * s2;
    h / v.sqrt() * (-(m1 - m2).powi(2) / (2.0 * v)).exp()
}

/// Mean embedding `mu_P(x) = E_P k(X, x)`.
pub fn mean_embedding(kernel: &KernelSpec, p: &Distribution, x: f64) -> Result<f64> {
    let h = kernel.width()?;
    if let Some(comps) = p.gaussian_components() {
        return Ok(comps.iter().map(|&(w, m, s)| w * gauss_pair(h, m, s, x, 0.0)).sum());
    }
    let dom = Domain::of(&[p])?;
    Ok(dom.integrate(|y| p.density(y) * (-(x - y).powi(2) / (2.0 * h * h)).exp()))
}

/// `<mu_P, mu_Q> = E k(X, Y)` with `X ~ P`, `Y ~ Q` independent.
pub fn embedding_inner(kernel: &KernelSpec, p: &Distribution, q: &Distribution) -> Result<f64> {
    let h = kernel.width()?;
    match (p.gaussian_components(), q.gaussian_components()) {
        (Some(a), Some(b)) => {
            let mut s = 0.0;
            for &(w1, m1, s1) in &a {
                for &(w2, m2, s2) in &b {
                    s += w1 * w2 * gauss_pair(h, m1, s1, m2, s2);
                }
            }
            Ok(s)
        }
        (None, None) => {
            let dp = Domain::of(&[p])?;
            let dq = Domain::of(&[q])?;
            let (Domain::Points(xs), Domain::Points(ys)) = (dp, dq) else { unreachable!() };
            let px: Vec<f64> = xs.iter().map(|&x| p.density(x)).collect();
            let qy: Vec<f64> = ys.iter().map(|&y| q.density(y)).collect();
            let mut s = 0.0;
            for (x, a) in xs.iter().zip(&px) {
                if *a == 0.0 {
                    continue;
                }
                for (y, b) in ys.iter().zip(&qy) {
                    s += a * b * (-(x - y).powi(2) / (2.0 * h * h)).exp();
                }
            }
            Ok(s)
        }
        _ => Err(Error::UnsupportedDomain("MMD between a discrete and a continuous law".into())),
    }
}

/// Squared MMD evaluated through the three embedding inner products.
pub fn mmd_squared(kernel: &KernelSpec, p: &Distribution, q: &Distribution) -> Result<f64> {
    let pp = embedding_inner(kernel, p, p)?;
    let qq = embedding_inner(kernel, q, q)?;
    let pq = embedding_inner(kernel, p, q)?;
    Ok((pp + qq - 2.0 * pq).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_heuristic() {
        let k = KernelSpec::default().resolve(&[0.0, 1.0, 3.0]);
        // Pairwise distances 1, 3, 2.
        assert_eq!(k.bandwidth, Bandwidth::Fixed(2.0));
        assert_eq!(KernelSpec::default().resolve(&[4.0, 4.0]).bandwidth, Bandwidth::Fixed(1.0));
        assert_eq!(KernelSpec::default().width(), Err(Error::UnresolvedBandwidth));
    }

    #[test]
    fn gaussian_embedding_matches_quadrature() {
        let k = KernelSpec::rbf(0.8);
        let p = Distribution::mixture(vec![0.4, 0.6], vec![-1.0, 2.0], vec![0.5, 1.5]).unwrap();
        let dom = Domain::of(&[&p]).unwrap();
        for x in [-2.0, 0.0, 1.3] {
            let quad = dom.integrate(|y| p.density(y) * k.eval(x, y).unwrap());
            assert!((mean_embedding(&k, &p, x).unwrap() - quad).abs() < 1e-9);
        }
        let q = Distribution::gaussian(0.5, 1.0).unwrap();
        let quad = dom.integrate(|y| p.density(y) * mean_embedding(&k, &q, y).unwrap());
        assert!((embedding_inner(&k, &p, &q).unwrap() - quad).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_serde() {
        let k: KernelSpec = serde_json::from_str(r#"{"bandwidth":"median-heuristic"}"#).unwrap();
        assert_eq!(k.bandwidth, Bandwidth::MedianHeuristic);
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"gaussian_rbf","bandwidth":2}"#).unwrap();
        assert_eq!(k.bandwidth, Bandwidth::Fixed(2.0));
        assert!(serde_json::from_str::<KernelSpec>(r#"{"bandwidth":-1}"#).is_err());
    }
}
