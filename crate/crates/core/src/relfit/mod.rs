//! Per-observation relative-fit statistics `T(x; P, Q)`.
//!
//! The candidate `P` comes first and the pilot `Q` second. Under the truth,
//! small values of the mean of `T` favour `P`; every threshold rule accepts
//! when the mean is at most its threshold.

pub mod witness;

use crate::distributions::{Distribution, Domain};
use crate::divergences::{power_integral, DivergenceTag};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

pub use witness::{witness_mmd, witness_tv, witness_w1, Witness};

/// Default corruption scale.
pub const DEFAULT_DELTA: f64 = 0.01;

/// A relative-fit statistic and the constants its confidence sets rely on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub divergence: DivergenceTag,
    pub nu: f64,
    pub c1: f64,
    /// Uniform bound on `|T|`, when one exists.
    pub bound: Option<f64>,
    pub delta: f64,
}

impl StatisticSpec {
    /// Standard `(nu, c1, B)` for `divergence`, with `delta = 0.01`.
    pub fn new(divergence: DivergenceTag) -> Self {
        let r2 = SQRT_2;
        let (nu, c1, bound) = match divergence {
            DivergenceTag::Kl => (1.0, 1.0, None),
            DivergenceTag::Dp { beta } => (1.0, 1.0, Some(1.0 + 1.0 / beta)),
            DivergenceTag::Hellinger => (1.0 + r2, 2.0 + r2, Some(1.0 + 1.0 / r2)),
            DivergenceTag::Tv => (3.0, 2.0, Some(1.5)),
            DivergenceTag::Wasserstein1 { b } => (3.0, 2.0, Some(1.5 * b)),
            DivergenceTag::Mmd { .. } => (3.0, 2.0, Some(2.0)),
        };
        Self { divergence, nu, c1, bound, delta: DEFAULT_DELTA }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.divergence.validate()?;
        if !(self.nu >= 1.0) || !(self.c1 >= 1.0) {
            return Err(Error::InvalidParameter(format!("nu = {} and c1 = {} must be at least 1", self.nu, self.c1)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be non-negative, got {}", self.delta)));
        }
        if let Some(b) = self.bound {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("bound must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// `log q(x) - log p(x)`; zero where both densities agree (including both zero).
pub fn t_kl(x: f64, p: &Distribution, q: &Distribution) -> f64 {
    let (lp, lq) = (p.log_density(x), q.log_density(x));
    if lp == lq {
        0.0
    } else {
        lq - lp
    }
}

fn dp_point(x: f64, p: &Distribution, q: &Distribution, beta: f64, ip: f64, iq: f64) -> f64 {
    let pb = (beta * p.log_density(x)).exp();
    let qb = (beta * q.log_density(x)).exp();
    (ip - iq) - (1.0 + 1.0 / beta) * (pb - qb)
}

/// `int (p^{1+b} - q^{1+b}) - (1 + 1/b) (p^b(x) - q^b(x))`.
pub fn t_dp(x: f64, p: &Distribution, q: &Distribution, beta: f64) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    Ok(dp_point(x, p, q, beta, power_integral(p, beta)?, power_integral(q, beta)?))
}

/// `psi(u) = (u - 1) / sqrt(1 + u^2)` evaluated at `u = exp(r)`, written so
/// that `psi(exp(-r)) = -psi(exp(r))` holds exactly.
pub fn psi_log(r: f64) -> f64 {
    if r.is_nan() {
        return 0.0;
    }
    let f = |r: f64| -(-r).exp_m1() / (1.0 + (-2.0 * r).exp()).sqrt();
    if r >= 0.0 {
        f(r)
    } else {
        -f(-r)
    }
}

/// `psi(u) = (u - 1) / sqrt(1 + u^2)` on `[0, inf]`.
pub fn psi(u: f64) -> f64 {
    if u == f64::INFINITY {
        1.0
    } else if u == 0.0 {
        -1.0
    } else {
        psi_log(u.ln())
    }
}

/// `(H^2(P, M) - H^2(Q, M)) / sqrt(2)` with `M = (P + Q) / 2`.
pub fn hellinger_offset(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    let dom = Domain::of(&[p, q])?;
    let gap = dom.integrate(|x| {
        let (a, b) = (p.density(x), q.density(x));
        let m = 0.5 * (a + b);
        0.5 * ((a.sqrt() - m.sqrt()).powi(2) - (b.sqrt() - m.sqrt()).powi(2))
    });
    Ok(gap / SQRT_2)
}

fn hellinger_point(x: f64, p: &Distribution, q: &Distribution, offset: f64) -> f64 {
    let (lp, lq) = (p.log_density(x), q.log_density(x));
    let r = if lp == lq { 0.0 } else { 0.5 * (lq - lp) };
    offset + psi_log(r)
}

/// `Delta(P, Q) + psi(sqrt(q(x) / p(x)))`.
pub fn t_hellinger(x: f64, p: &Distribution, q: &Distribution) -> Result<f64> {
    Ok(hellinger_point(x, p, q, hellinger_offset(p, q)?))
}

/// `int f* d(P + Q)/2 - f*(x)`.
pub fn t_ipm(x: f64, witness: &Witness) -> Result<f64> {
    Ok(witness.offset() - witness.eval(x)?)
}

/// The statistic for a fixed `(P, Q)` pair with its constants precomputed.
#[derive(Debug, Clone)]
pub struct PairStatistic {
    kind: Prepared,
    p: Distribution,
    q: Distribution,
    diagonal: bool,
}

#[derive(Debug, Clone)]
enum Prepared {
    Zero,
    Kl,
    Dp { beta: f64, ip: f64, iq: f64 },
    Hellinger { offset: f64 },
    Ipm(Witness),
}

impl PairStatistic {
    pub fn new(divergence: &DivergenceTag, p: &Distribution, q: &Distribution) -> Result<Self> {
        let diagonal = p == q;
        let kind = if diagonal {
            Prepared::Zero
        } else {
            match divergence {
                DivergenceTag::Kl => Prepared::Kl,
                DivergenceTag::Dp { beta } => {
                    Prepared::Dp { beta: *beta, ip: power_integral(p, *beta)?, iq: power_integral(q, *beta)? }
                }
                DivergenceTag::Hellinger => Prepared::Hellinger { offset: hellinger_offset(p, q)? },
                DivergenceTag::Tv => Prepared::Ipm(witness_tv(p, q)?),
                DivergenceTag::Wasserstein1 { b } => Prepared::Ipm(witness_w1(p, q, *b)?),
                DivergenceTag::Mmd { kernel } => Prepared::Ipm(witness_mmd(p, q, kernel)?),
            }
        };
        let diagonal = diagonal || matches!(kind, Prepared::Ipm(Witness::Zero));
        Ok(Self { kind, p: p.clone(), q: q.clone(), diagonal })
    }

    /// True when the statistic is identically zero because `P = Q`.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (p, q) = (&self.p, &self.q);
        match &self.kind {
            Prepared::Zero => Ok(0.0),
            Prepared::Kl => Ok(t_kl(x, p, q)),
            Prepared::Dp { beta, ip, iq } => Ok(dp_point(x, p, q, *beta, *ip, *iq)),
            Prepared::Hellinger { offset } => Ok(hellinger_point(x, p, q, *offset)),
            Prepared::Ipm(w) => t_ipm(x, w),
        }
    }

    pub fn values(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// `E T(X; P, Q)` for `X ~ truth`, by summation or quadrature.
    pub fn expectation(&self, truth: &Distribution) -> Result<f64> {
        let dom = Domain::of(&[truth, &self.p, &self.q])?;
        let err = std::cell::RefCell::new(None);
        let v = dom.integrate(|x| {
            let d = truth.density(x);
            if d == 0.0 {
                return 0.0;
            }
            match self.eval(x) {
                Ok(t) => d * t,
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    0.0
                }
            }
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// Standard normal corruption noise for `n` observations.
pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Raw and corrupted summaries of `T_1, ..., T_{n0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSample {
    pub raw: Vec<f64>,
    pub corrupted: Vec<f64>,
    pub delta: f64,
    pub noise_seed: u64,
    pub raw_mean: f64,
    /// Mean of the corrupted values, `raw_mean + delta * mean(Z)`.
    pub mean: f64,
    /// Population sd (divide by `n0`) of the corrupted values.
    pub sd: f64,
    pub raw_sd: f64,
    /// Set when the candidate equals the pilot.
    pub diagonal: bool,
}

fn population_sd(xs: &[f64], mean: f64) -> f64 {
    if xs.iter().all(|&x| x == xs[0]) {
        return if xs[0].is_finite() { 0.0 } else { f64::NAN };
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

impl StatisticSample {
    pub fn n0(&self) -> usize {
        self.raw.len()
    }

    /// Summarizes with noise drawn from `noise_seed`.
    pub fn new(values: Vec<f64>, delta: f64, noise_seed: u64) -> Result<Self> {
        let z = noise(values.len(), noise_seed);
        Self::with_noise(values, delta, &z, noise_seed)
    }

    /// Summarizes with caller-supplied noise `z` (one draw per observation).
    pub fn with_noise(values: Vec<f64>, delta: f64, z: &[f64], noise_seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if z.len() < n {
            return Err(Error::InvalidParameter(format!("need {n} noise draws, got {}", z.len())));
        }
        let raw_mean = values.iter().sum::<f64>() / n as f64;
        let zbar = z[..n].iter().sum::<f64>() / n as f64;
        let corrupted: Vec<f64> = values.iter().zip(z).map(|(t, e)| t + delta * e).collect();
        let mean = raw_mean + delta * zbar;
        let sd = population_sd(&corrupted, mean);
        let raw_sd = population_sd(&values, raw_mean);
        Ok(Self { raw: values, corrupted, delta, noise_seed, raw_mean, mean, sd, raw_sd, diagonal: false })
    }

    pub fn with_diagonal(mut self, diagonal: bool) -> Self {
        self.diagonal = diagonal;
        self
    }
}

/// Convenience wrapper matching the `summarize(values, delta, seed)` form.
pub fn summarize(values: Vec<f64>, delta: f64, noise_seed: u64) -> Result<StatisticSample> {
    StatisticSample::new(values, delta, noise_seed)
}
