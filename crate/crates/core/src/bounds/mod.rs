//! Threshold rules turning a [`StatisticSample`] into an accept/reject decision.
//!
//! Every rule accepts the candidate when the mean statistic is at most its
//! threshold. The asymptotic rule studentizes the corrupted sample; the
//! split likelihood-ratio rule and the finite-sample rules use raw values.

mod bentkus;

pub use bentkus::{bentkus_quantile, bentkus_tail};

use crate::error::{Error, Result};
use crate::numeric::normal::{std_normal_quantile, upper_quantile};
use crate::relfit::StatisticSample;
use serde::{Deserialize, Serialize};

/// Default `c` capping the empirical Bernstein bets.
pub const DEFAULT_EB_CAP: f64 = 0.5;

/// Which threshold to compare `T-bar` against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// `z_alpha * sd / sqrt(n0)` on the corrupted sample.
    RediNormal,
    /// `log(1/alpha) / n0` on the raw sample.
    Slrt,
    Hoeffding { b: f64 },
    Bernstein { b: f64, s: f64 },
    EmpiricalBernstein {
        b: f64,
        #[serde(default = "default_cap")]
        c: f64,
    },
    Bentkus { b: f64, s: f64 },
    /// `delta_split` defaults to `alpha / 3` when absent.
    EmpiricalBentkus {
        b: f64,
        #[serde(default)]
        delta_split: Option<f64>,
    },
}

fn default_cap() -> f64 {
    DEFAULT_EB_CAP
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::RediNormal => "redi_normal",
            RuleKind::Slrt => "slrt",
            RuleKind::Hoeffding { .. } => "hoeffding",
            RuleKind::Bernstein { .. } => "bernstein",
            RuleKind::EmpiricalBernstein { .. } => "empirical_bernstein",
            RuleKind::Bentkus { .. } => "bentkus",
            RuleKind::EmpiricalBentkus { .. } => "empirical_bentkus",
        }
    }

    /// The bound `B`, for rules that have one.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            RuleKind::RediNormal | RuleKind::Slrt => None,
            RuleKind::Hoeffding { b }
            | RuleKind::Bernstein { b, .. }
            | RuleKind::EmpiricalBernstein { b, .. }
            | RuleKind::Bentkus { b, .. }
            | RuleKind::EmpiricalBentkus { b, .. } => Some(b),
        }
    }

    /// Whether the rule needs an externally supplied variance bound `S`.
    pub fn needs_variance(&self) -> bool {
        matches!(self, RuleKind::Bernstein { .. } | RuleKind::Bentkus { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    #[serde(flatten)]
    pub kind: RuleKind,
    pub alpha: f64,
}

/// Outcome of one test of relative fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub accept: bool,
    /// The quantity compared: `T-bar`, or the betting sum for empirical Bernstein.
    pub statistic: f64,
    /// Its critical value.
    pub threshold: f64,
    /// Variance proxy used by the Bernstein/Bentkus family, if any.
    pub variance_proxy: Option<f64>,
}

impl Decision {
    fn compare(statistic: f64, threshold: f64, variance_proxy: Option<f64>) -> Self {
        Decision { accept: statistic <= threshold, statistic, threshold, variance_proxy }
    }

    /// `statistic - threshold`; non-positive exactly when accepted, barring NaN.
    pub fn evidence(&self) -> f64 {
        self.statistic - self.threshold
    }
}

impl ThresholdRule {
    pub fn new(kind: RuleKind, alpha: f64) -> Result<Self> {
        let rule = ThresholdRule { kind, alpha };
        rule.validate()?;
        Ok(rule)
    }

    pub fn redi_normal(alpha: f64) -> Result<Self> {
        Self::new(RuleKind::RediNormal, alpha)
    }

    pub fn slrt(alpha: f64) -> Result<Self> {
        Self::new(RuleKind::Slrt, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if let Some(b) = self.kind.bound() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("bound B must be positive and finite, got {b}")));
            }
        }
        match self.kind {
            RuleKind::Bernstein { s, .. } | RuleKind::Bentkus { s, .. } if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::InvalidParameter(format!("variance bound S must be non-negative, got {s}")))
            }
            RuleKind::EmpiricalBernstein { c, .. } if !(c > 0.0 && c < 1.0) => {
                Err(Error::InvalidParameter(format!("empirical Bernstein cap c must lie in (0, 1), got {c}")))
            }
            RuleKind::EmpiricalBentkus { delta_split: Some(d), .. } if !(d > 0.0 && d < alpha) => {
                Err(Error::InvalidSplit { split: d, alpha })
            }
            _ => Ok(()),
        }
    }

    /// A copy with the Bernstein/Bentkus variance bound replaced by `s`.
    /// Other rules are returned unchanged.
    pub fn with_variance(&self, s: f64) -> Self {
        let kind = match self.kind {
            RuleKind::Bernstein { b, .. } => RuleKind::Bernstein { b, s },
            RuleKind::Bentkus { b, .. } => RuleKind::Bentkus { b, s },
            k => k,
        };
        ThresholdRule { kind, alpha: self.alpha }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        ThresholdRule { kind: self.kind, alpha }
    }

    pub fn decide(&self, sample: &StatisticSample) -> Result<Decision> {
        let alpha = self.alpha;
        if sample.diagonal {
            let threshold = match self.kind {
                RuleKind::RediNormal => upper_quantile(alpha) * sample.sd / (sample.n0() as f64).sqrt(),
                _ => 0.0,
            };
            return Ok(Decision { accept: true, statistic: 0.0, threshold, variance_proxy: None });
        }
        match self.kind {
            RuleKind::RediNormal => redi_normal(sample, alpha),
            RuleKind::Slrt => Ok(Decision::compare(sample.raw_mean, slrt_threshold(sample.n0(), alpha), None)),
            RuleKind::Hoeffding { b } => hoeffding(&sample.raw, alpha, b),
            RuleKind::Bernstein { b, s } => bernstein(&sample.raw, alpha, b, s),
            RuleKind::EmpiricalBernstein { b, c } => empirical_bernstein(&sample.raw, alpha, b, c),
            RuleKind::Bentkus { b, s } => bentkus(&sample.raw, alpha, b, s),
            RuleKind::EmpiricalBentkus { b, delta_split } => {
                empirical_bentkus(&sample.raw, alpha, b, delta_split.unwrap_or(alpha / 3.0))
            }
        }
    }
}

/// Accept iff the corrupted mean is at most `z_alpha * sd / sqrt(n0)`.
///
/// A non-finite mean (only possible for the KL statistic) is accepted exactly
/// when it is `-inf`.
pub fn redi_normal(sample: &StatisticSample, alpha: f64) -> Result<Decision> {
    let n0 = sample.n0();
    if n0 < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n0 });
    }
    if !sample.mean.is_finite() {
        let accept = sample.mean == f64::NEG_INFINITY;
        return Ok(Decision { accept, statistic: sample.mean, threshold: f64::NAN, variance_proxy: None });
    }
    if sample.delta == 0.0 && sample.sd == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let threshold = upper_quantile(alpha) * sample.sd / (n0 as f64).sqrt();
    Ok(Decision::compare(sample.mean, threshold, None))
}

/// `log(1/alpha) / n0`.
pub fn slrt_threshold(n0: usize, alpha: f64) -> f64 {
    (1.0 / alpha).ln() / n0 as f64
}

/// `B sqrt(log(1/alpha) / (2 n0))`.
pub fn hoeffding_threshold(n0: usize, alpha: f64, b: f64) -> f64 {
    b * ((1.0 / alpha).ln() / (2.0 * n0 as f64)).sqrt()
}

/// `sqrt(2 S^2 L / n0 + (B^2/9)(L/n0)^2) + B L / (3 n0)` with `L = log(1/alpha)`.
pub fn bernstein_threshold(n0: usize, alpha: f64, b: f64, s: f64) -> f64 {
    let l = (1.0 / alpha).ln() / n0 as f64;
    (2.0 * s * s * l + b * b / 9.0 * l * l).sqrt() + b * l / 3.0
}

fn check_bounded(values: &[f64], b: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let slack = b * 1e-12;
    for &v in values {
        if !(v.abs() <= b + slack) {
            return Err(Error::BoundViolation { value: v, bound: b });
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn hoeffding(values: &[f64], alpha: f64, b: f64) -> Result<Decision> {
    check_bounded(values, b)?;
    Ok(Decision::compare(mean(values), hoeffding_threshold(values.len(), alpha, b), None))
}

pub fn bernstein(values: &[f64], alpha: f64, b: f64, s: f64) -> Result<Decision> {
    check_bounded(values, b)?;
    Ok(Decision::compare(mean(values), bernstein_threshold(values.len(), alpha, b, s), Some(s)))
}

fn psi_e(lambda: f64) -> f64 {
    -((-lambda).ln_1p() + lambda)
}

/// Predictable-plug-in empirical Bernstein test on `T~ = (T + B) / (2B)`.
///
/// Rejects when `sum lambda_i (T~_i - 1/2) > log(1/alpha) + sum v_i psi_E(lambda_i)`.
/// The reported statistic is the left side and the threshold the right side.
pub fn empirical_bernstein(values: &[f64], alpha: f64, b: f64, c: f64) -> Result<Decision> {
    check_bounded(values, b)?;
    let n0 = values.len() as f64;
    let log_inv = (1.0 / alpha).ln();
    let mut lhs = 0.0;
    let mut rhs = log_inv;
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut prev_mean = 0.0;
    let mut prev_var = 0.25;
    for (i, &t) in values.iter().enumerate() {
        let x = (t + b) / (2.0 * b);
        let lambda = (2.0 * log_inv / (n0 * prev_var)).sqrt().min(c);
        lhs += lambda * (x - 0.5);
        rhs += (x - prev_mean).powi(2) * psi_e(lambda);
        let k = (i + 2) as f64;
        sum += x;
        let m = sum / k;
        sq += (x - m).powi(2);
        prev_mean = m;
        prev_var = (0.25 + sq) / k;
    }
    Ok(Decision::compare(lhs, rhs, None))
}

pub fn bentkus(values: &[f64], alpha: f64, b: f64, s: f64) -> Result<Decision> {
    check_bounded(values, b)?;
    let n0 = values.len();
    let q = bentkus_quantile(n0, alpha, b, s)? / n0 as f64;
    Ok(Decision::compare(mean(values), q, Some(s)))
}

/// `B (sqrt(2) n)^{-1} sqrt(floor(n/2)) Phi^{-1}(1 - 2 delta / e^2)`.
pub fn bentkus_g(n: usize, b: f64, delta: f64) -> f64 {
    let z = std_normal_quantile(1.0 - 2.0 * delta / std::f64::consts::E.powi(2));
    b / (std::f64::consts::SQRT_2 * n as f64) * ((n / 2) as f64).sqrt() * z
}

/// Smallest prefix over-estimate `sqrt(Sbar_i^2 + g_i^2) + g_i` of the standard
/// deviation, over prefixes of length `i >= 2`.
pub fn bentkus_sd_overestimate(values: &[f64], b: f64, delta: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: values.len() });
    }
    let mut best = f64::INFINITY;
    let mut pair_sum = 0.0;
    for i in 2..=values.len() {
        if i % 2 == 0 {
            pair_sum += (values[i - 1] - values[i - 2]).powi(2) / 2.0;
        }
        let s2 = pair_sum / (i / 2) as f64;
        let g = bentkus_g(i, b, delta);
        best = best.min((s2 + g * g).sqrt() + g);
    }
    Ok(best)
}

pub fn empirical_bentkus(values: &[f64], alpha: f64, b: f64, delta_split: f64) -> Result<Decision> {
    if !(delta_split > 0.0 && delta_split < alpha) {
        return Err(Error::InvalidSplit { split: delta_split, alpha });
    }
    check_bounded(values, b)?;
    let s = bentkus_sd_overestimate(values, b, delta_split)?;
    let n0 = values.len();
    let q = bentkus_quantile(n0, alpha - delta_split, b, s)? / n0 as f64;
    Ok(Decision::compare(mean(values), q, Some(s)))
}
