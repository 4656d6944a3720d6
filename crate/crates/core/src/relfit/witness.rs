//! Closed-form witness functions for the TV, Wasserstein-1 and MMD metrics.

use crate::distributions::Distribution;
use crate::divergences::kernel::{embedding_inner, mean_embedding};
use crate::divergences::{cdf_table, check_unit_support, yatracos_set, KernelSpec, YatracosSet};
use crate::error::Result;

/// Cells used for the sign function of continuous laws on `[0, b]`.
pub const W1_CELLS: usize = 4096;
/// Embedding gaps below this are treated as `P = Q`.
pub const MMD_ZERO_GAP: f64 = 1e-12;

/// A witness `f*` together with its mean under `(P + Q) / 2`.
#[derive(Debug, Clone)]
pub enum Witness {
    /// Used whenever `P = Q`; the statistic is then identically zero.
    Zero,
    Tv { set: YatracosSet, offset: f64 },
    /// Piecewise-linear `f*(x) = int_0^x sgn(t) dt` with `sgn` constant on
    /// cells of width `width` starting at 0.
    W1 { signs: Vec<f64>, knots: Vec<f64>, width: f64, b: f64, offset: f64 },
    Mmd { kernel: KernelSpec, p: Distribution, q: Distribution, norm: f64, offset: f64 },
}

impl Witness {
    pub fn is_zero(&self) -> bool {
        matches!(self, Witness::Zero)
    }

    /// `f*(x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Witness::Zero => 0.0,
            Witness::Tv { set, .. } => {
                if set.contains(x) {
                    0.5
                } else {
                    -0.5
                }
            }
            Witness::W1 { signs, knots, width, b, .. } => {
                let x = x.clamp(0.0, *b);
                let k = ((x / width).floor() as usize).min(signs.len() - 1);
                knots[k] + signs[k] * (x - k as f64 * width)
            }
            Witness::Mmd { kernel, p, q, norm, .. } => {
                (mean_embedding(kernel, p, x)? - mean_embedding(kernel, q, x)?) / norm
            }
        })
    }

    /// `int f* d(P + Q)/2`.
    pub fn offset(&self) -> f64 {
        match self {
            Witness::Zero => 0.0,
            Witness::Tv { offset, .. } | Witness::W1 { offset, .. } | Witness::Mmd { offset, .. } => *offset,
        }
    }
}

/// `f* = I(x in A) - 1/2` with `A = {p > q}`.
pub fn witness_tv(p: &Distribution, q: &Distribution) -> Result<Witness> {
    if p == q {
        return Ok(Witness::Zero);
    }
    let set = yatracos_set(p, q)?;
    let offset = 0.5 * (set.mass(p) + set.mass(q)) - 0.5;
    Ok(Witness::Tv { set, offset })
}

/// `f*(x) = int_0^x sgn(t) dt`, `sgn = I(F_Q > F_P) - I(F_P > F_Q)`.
///
/// Integer-valued laws are handled exactly on unit cells. Continuous laws use
/// a midpoint rule on [`W1_CELLS`] cells.
pub fn witness_w1(p: &Distribution, q: &Distribution, b: f64) -> Result<Witness> {
    check_unit_support(p, b)?;
    check_unit_support(q, b)?;
    if p == q {
        return Ok(Witness::Zero);
    }
    let (width, fp, fq): (f64, Vec<f64>, Vec<f64>) = if p.is_discrete() && q.is_discrete() {
        let cells = b.ceil() as usize;
        (1.0, cdf_table(p, cells), cdf_table(q, cells))
    } else {
        let width = b / W1_CELLS as f64;
        let mids: Vec<f64> = (0..W1_CELLS).map(|k| (k as f64 + 0.5) * width).collect();
        (width, mids.iter().map(|&t| p.cdf(t)).collect(), mids.iter().map(|&t| q.cdf(t)).collect())
    };
    let n = fp.len();
    let signs: Vec<f64> = (0..n)
        .map(|k| {
            if fq[k] > fp[k] {
                1.0
            } else if fp[k] > fq[k] {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut knots = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut offset = 0.0;
    for k in 0..n {
        knots.push(acc);
        let len = (((k + 1) as f64) * width).min(b) - k as f64 * width;
        acc += signs[k] * len;
        // E_M f*(X) = int sgn(t) (1 - F_M(t)) dt.
        offset += signs[k] * (1.0 - 0.5 * (fp[k] + fq[k])) * len;
    }
    if signs.iter().all(|s| *s == 0.0) {
        return Ok(Witness::Zero);
    }
    Ok(Witness::W1 { signs, knots, width, b, offset })
}

/// `f* = (mu_P - mu_Q) / ||mu_P - mu_Q||`, with the zero witness for
/// embedding gaps below [`MMD_ZERO_GAP`].
pub fn witness_mmd(p: &Distribution, q: &Distribution, kernel: &KernelSpec) -> Result<Witness> {
    kernel.width()?;
    let pp = embedding_inner(kernel, p, p)?;
    let qq = embedding_inner(kernel, q, q)?;
    let pq = embedding_inner(kernel, p, q)?;
    let norm = (pp + qq - 2.0 * pq).max(0.0).sqrt();
    if norm < MMD_ZERO_GAP || p == q {
        return Ok(Witness::Zero);
    }
    Ok(Witness::Mmd { kernel: *kernel, p: p.clone(), q: q.clone(), norm, offset: (pp - qq) / (2.0 * norm) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Domain;
    use crate::divergences::{divergence, DivergenceTag};

    fn bern(p: f64) -> Distribution {
        Distribution::bernoulli(p).unwrap()
    }

    #[test]
    fn tv_values() {
        let w = witness_tv(&bern(0.7), &bern(0.3)).unwrap();
        assert_eq!(w.eval(1.0).unwrap(), 0.5);
        assert_eq!(w.eval(0.0).unwrap(), -0.5);
        assert!(witness_tv(&bern(0.4), &bern(0.4)).unwrap().is_zero());
    }

    #[test]
    fn w1_point_masses() {
        // Point masses at 0 and at b = 1.
        let w = witness_w1(&bern(0.0), &bern(1.0), 1.0).unwrap();
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert!((w.eval(x).unwrap() + x).abs() < 1e-15);
        }
        let p = Distribution::poisson(2.0).unwrap();
        assert!(witness_w1(&p, &p, 60.0).unwrap().is_zero());
    }

    #[test]
    fn w1_witness_attains_distance() {
        let p = Distribution::poisson(3.0).unwrap();
        let q = Distribution::NegativeBinomial { mean: 4.0, kappa: 2.0 };
        let b = 200.0;
        let w = witness_w1(&p, &q, b).unwrap();
        let dom = Domain::of(&[&p, &q]).unwrap();
        let ep = dom.integrate(|x| p.density(x) * w.eval(x).unwrap());
        let eq = dom.integrate(|x| q.density(x) * w.eval(x).unwrap());
        let w1 = divergence(&DivergenceTag::Wasserstein1 { b }, &p, &q).unwrap();
        assert!((ep - eq - w1).abs() < 1e-9);
        assert!((0.5 * (ep + eq) - w.offset()).abs() < 1e-9);
    }

    #[test]
    fn mmd_witness_matches_kernel_sums() {
        let k = KernelSpec::rbf(0.9);
        let (p, q) = (bern(0.8), bern(0.35));
        let kk = |x: f64, y: f64| k.eval(x, y).unwrap();
        let pts = [0.0, 1.0];
        let mu = |d: &Distribution, x: f64| pts.iter().map(|&y| d.density(y) * kk(x, y)).sum::<f64>();
        let inner = |a: &Distribution, b: &Distribution| {
            pts.iter().map(|&x| a.density(x) * mu(b, x)).sum::<f64>()
        };
        let norm = (inner(&p, &p) + inner(&q, &q) - 2.0 * inner(&p, &q)).sqrt();
        let w = witness_mmd(&p, &q, &k).unwrap();
        for x in [0.0, 1.0, 2.0, 0.5] {
            let oracle = (mu(&p, x) - mu(&q, x)) / norm;
            assert!((w.eval(x).unwrap() - oracle).abs() < 1e-12);
        }
        assert!((w.offset() - (inner(&p, &p) - inner(&q, &q)) / (2.0 * norm)).abs() < 1e-12);
        let ep: f64 = pts.iter().map(|&x| p.density(x) * w.eval(x).unwrap()).sum();
        let eq: f64 = pts.iter().map(|&x| q.density(x) * w.eval(x).unwrap()).sum();
        assert!((ep - eq - norm).abs() < 1e-12);
        assert!(witness_mmd(&p, &p, &k).unwrap().is_zero());
    }
}
