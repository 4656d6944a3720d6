//! Divergences between laws, projections onto a working family, and set-size
//! diagnostics.

pub mod kernel;
pub mod projection;
pub mod yatracos;

use crate::distributions::{gaussian_overlap, Distribution, Domain};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use kernel::{Bandwidth, KernelKind, KernelSpec};
pub use projection::{approx_projection_set, project, rho_hausdorff, rho_hausdorff_values, ApproxSet, ProjectionResult};
pub use yatracos::{yatracos_set, YatracosSet};

/// Which divergence `rho` is in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DivergenceTag {
    Kl,
    Dp { beta: f64 },
    Hellinger,
    Tv,
    /// Wasserstein-1 for laws supported in `[0, b]`.
    Wasserstein1 { b: f64 },
    Mmd { #[serde(default)] kernel: KernelSpec },
}

impl DivergenceTag {
    pub fn validate(&self) -> Result<()> {
        match self {
            DivergenceTag::Dp { beta } if !(*beta > 0.0) => {
                Err(Error::InvalidParameter(format!("DP needs beta > 0, got {beta}")))
            }
            DivergenceTag::Wasserstein1 { b } if !(*b > 0.0) => {
                Err(Error::InvalidParameter(format!("Wasserstein-1 needs b > 0, got {b}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, DivergenceTag::Kl | DivergenceTag::Dp { .. })
    }

    pub fn is_ipm(&self) -> bool {
        matches!(self, DivergenceTag::Tv | DivergenceTag::Wasserstein1 { .. } | DivergenceTag::Mmd { .. })
    }

    pub fn name(&self) -> String {
        match self {
            DivergenceTag::Kl => "kl".into(),
            DivergenceTag::Dp { beta } => format!("dp(beta={beta})"),
            DivergenceTag::Hellinger => "hellinger".into(),
            DivergenceTag::Tv => "tv".into(),
            DivergenceTag::Wasserstein1 { b } => format!("wasserstein1(b={b})"),
            DivergenceTag::Mmd { .. } => "mmd".into(),
        }
    }

    /// Default slack factor for the approximate projection set.
    pub fn default_nu(&self) -> f64 {
        match self {
            DivergenceTag::Kl | DivergenceTag::Dp { .. } => 1.0,
            DivergenceTag::Hellinger => (3.0 + 2.0 * 2f64.sqrt()).sqrt(),
            _ => 3.0,
        }
    }

    /// Resolves data-dependent settings (the MMD bandwidth) on `data`.
    pub fn resolve(&self, data: &[f64]) -> DivergenceTag {
        match self {
            DivergenceTag::Mmd { kernel } => DivergenceTag::Mmd { kernel: kernel.resolve(data) },
            other => *other,
        }
    }
}

/// `∫ p^{1+beta}` over the dominating measure.
pub fn power_integral(p: &Distribution, beta: f64) -> Result<f64> {
    if let Distribution::Gaussian { sd, .. } = p {
        return Ok((2.0 * PI * sd * sd).powf(-beta / 2.0) / (1.0 + beta).sqrt());
    }
    let dom = Domain::of(&[p])?;
    Ok(dom.integrate(|x| (p.log_density(x) * (1.0 + beta)).exp()))
}

/// `∫ q^beta dP`.
fn cross_power(q: &Distribution, p: &Distribution, beta: f64) -> Result<f64> {
    if let (Distribution::Gaussian { mean, sd }, Some(comps)) = (q, p.gaussian_components()) {
        let scale = (2.0 * PI * sd * sd).powf(-beta / 2.0) * (2.0 * PI * sd * sd / beta).sqrt();
        let s = sd / beta.sqrt();
        return Ok(comps.iter().map(|&(w, m, sk)| w * scale * gaussian_overlap(*mean, s, m, sk)).sum());
    }
    let dom = Domain::of(&[p, q])?;
    Ok(dom.integrate(|x| {
        let lp = p.log_density(x);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            (lp + beta * q.log_density(x)).exp()
        }
    }))
}

/// `∫ p log p`.
fn neg_entropy(p: &Distribution) -> Result<f64> {
    if let Distribution::Gaussian { sd, .. } = p {
        return Ok(-0.5 * (2.0 * PI * std::f64::consts::E * sd * sd).ln());
    }
    let dom = Domain::of(&[p])?;
    Ok(dom.integrate(|x| {
        let lp = p.log_density(x);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp() * lp
        }
    }))
}

/// `∫ p log q`, possibly `-inf`.
fn cross_log(p: &Distribution, q: &Distribution) -> Result<f64> {
    if let (Distribution::Gaussian { mean, sd }, false) = (q, p.is_discrete()) {
        let second = p.variance() + (p.mean() - mean).powi(2);
        return Ok(-second / (2.0 * sd * sd) - sd.ln() - 0.5 * (2.0 * PI).ln());
    }
    let dom = Domain::of(&[p, q])?;
    Ok(dom.integrate(|x| {
        let lp = p.log_density(x);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp() * q.log_density(x)
        }
    }))
}

fn hellinger_squared(p: &Distribution, q: &Distribution) -> Result<f64> {
    if let (Distribution::Gaussian { mean: m1, sd: s1 }, Distribution::Gaussian { mean: m2, sd: s2 }) = (p, q) {
        let v = s1 * s1 + s2 * s2;
        let log_bc = 0.5 * (-(s1 - s2).powi(2) / v).ln_1p() - (m1 - m2).powi(2) / (4.0 * v);
        return Ok(-log_bc.exp_m1());
    }
    let dom = Domain::of(&[p, q])?;
    Ok(0.5 * dom.integrate(|x| (p.density(x).sqrt() - q.density(x).sqrt()).powi(2)))
}

fn total_variation(p: &Distribution, q: &Distribution) -> Result<f64> {
    match Domain::of(&[p, q])? {
        Domain::Points(xs) => Ok(0.5 * xs.iter().map(|&x| (p.density(x) - q.density(x)).abs()).sum::<f64>()),
        Domain::Continuous { .. } => {
            let a = yatracos_set(p, q)?;
            Ok((a.mass(p) - a.mass(q)).clamp(0.0, 1.0))
        }
    }
}

/// Checks that `d` lives in `[0, b]` up to the truncation tail mass.
pub fn check_unit_support(d: &Distribution, b: f64) -> Result<()> {
    let (lo, hi) = d.effective_support();
    if lo >= 0.0 && hi <= b {
        Ok(())
    } else {
        Err(Error::UnsupportedDomain(format!(
            "Wasserstein-1 needs support in [0, {b}], law {d:?} spans [{lo}, {hi}]"
        )))
    }
}

/// CDF values `F(k)` for `k = 0..cells`, built by cumulative summation.
pub fn cdf_table(d: &Distribution, cells: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..cells)
        .map(|k| {
            acc += d.density(k as f64);
            acc.min(1.0)
        })
        .collect()
}

fn wasserstein1(p: &Distribution, q: &Distribution, b: f64) -> Result<f64> {
    check_unit_support(p, b)?;
    check_unit_support(q, b)?;
    match Domain::of(&[p, q])? {
        Domain::Points(_) => {
            let cells = b.ceil() as usize;
            let (fp, fq) = (cdf_table(p, cells), cdf_table(q, cells));
            Ok((0..cells).map(|k| (fp[k] - fq[k]).abs() * (((k + 1) as f64).min(b) - k as f64)).sum())
        }
        Domain::Continuous { .. } => {
            Ok(crate::numeric::integrate(|t| (p.cdf(t) - q.cdf(t)).abs(), 0.0, b, crate::distributions::QUAD_TOL))
        }
    }
}

/// `rho(P || Q)`. Hellinger is returned as the distance `H`, not `H^2`.
/// KL is `+inf` when `P` is not dominated by `Q`.
pub fn divergence(rho: &DivergenceTag, p: &Distribution, q: &Distribution) -> Result<f64> {
    Anchored::new(rho, p)?.to(q)
}

/// A divergence with its first argument fixed, caching terms that depend only
/// on that argument.
#[derive(Debug, Clone)]
pub struct Anchored<'a> {
    rho: DivergenceTag,
    p: &'a Distribution,
    self_term: f64,
}

impl<'a> Anchored<'a> {
    pub fn new(rho: &DivergenceTag, p: &'a Distribution) -> Result<Self> {
        rho.validate()?;
        let self_term = match rho {
            DivergenceTag::Kl => neg_entropy(p)?,
            DivergenceTag::Dp { beta } => power_integral(p, *beta)? / beta,
            DivergenceTag::Mmd { kernel } => kernel::embedding_inner(kernel, p, p)?,
            _ => 0.0,
        };
        Ok(Self { rho: *rho, p, self_term })
    }

    pub fn to(&self, q: &Distribution) -> Result<f64> {
        let p = self.p;
        let v = match &self.rho {
            DivergenceTag::Kl => {
                if p == q {
                    return Ok(0.0);
                }
                let c = cross_log(p, q)?;
                if c == f64::NEG_INFINITY || c.is_nan() {
                    f64::INFINITY
                } else {
                    self.self_term - c
                }
            }
            DivergenceTag::Dp { beta } => {
                if p == q {
                    return Ok(0.0);
                }
                power_integral(q, *beta)? - (1.0 + 1.0 / beta) * cross_power(q, p, *beta)? + self.self_term
            }
            DivergenceTag::Hellinger => hellinger_squared(p, q)?.max(0.0).sqrt(),
            DivergenceTag::Tv => total_variation(p, q)?,
            DivergenceTag::Wasserstein1 { b } => wasserstein1(p, q, *b)?,
            DivergenceTag::Mmd { kernel } => {
                let qq = kernel::embedding_inner(kernel, q, q)?;
                let pq = kernel::embedding_inner(kernel, p, q)?;
                (self.self_term + qq - 2.0 * pq).max(0.0).sqrt()
            }
        };
        Ok(if v.is_nan() { f64::INFINITY } else { v.max(0.0) })
    }
}
