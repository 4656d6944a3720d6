//! Parametric laws used both as data-generating truths and as working models.
//!
//! Discrete families live on the non-negative integers and are dominated by
//! counting measure; Gaussian families are dominated by Lebesgue measure.

use crate::error::{Error, Result};
use crate::numeric::{integrate_pieces, std_normal_cdf};
use crate::numeric::normal::upper_quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, Normal, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tail mass discarded when truncating a support for summation or quadrature.
pub const TAIL_MASS: f64 = 1e-12;
/// Absolute tolerance for continuous integrals.
pub const QUAD_TOL: f64 = 1e-10;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A concrete probability law.
///
/// The negative binomial is stored by its mean and dispersion ratio
/// `kappa = variance / mean`; see [`Distribution::negbin_size_prob`] for the
/// conversion to the usual (size, success probability) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Bernoulli { p: f64 },
    /// Finite law on `{0, 1, ..., probs.len() - 1}`.
    Categorical { probs: Vec<f64> },
    Poisson { lambda: f64 },
    NegativeBinomial { mean: f64, kappa: f64 },
    Gaussian { mean: f64, sd: f64 },
    GaussianMixture { weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64> },
}

/// Support descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Binary,
    NonNegativeIntegers,
    RealLine,
    Interval { upper: f64 },
}

/// Builds the negative binomial with the given mean and variance `kappa * mean`.
pub fn negbin_from_mean_dispersion(mean: f64, kappa: f64) -> Result<Distribution> {
    let d = Distribution::NegativeBinomial { mean, kappa };
    d.validate()?;
    Ok(d)
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn as_count(x: f64) -> Option<u64> {
    if x >= 0.0 && x.fract() == 0.0 && x.is_finite() {
        Some(x as u64)
    } else {
        None
    }
}

impl Distribution {
    pub fn bernoulli(p: f64) -> Result<Self> {
        let d = Self::Bernoulli { p };
        d.validate()?;
        Ok(d)
    }

    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        let d = Self::Categorical { probs };
        d.validate()?;
        Ok(d)
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        let d = Self::Poisson { lambda };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        let d = Self::Gaussian { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let d = Self::GaussianMixture { weights, means, sds };
        d.validate()?;
        Ok(d)
    }

    /// Checks that parameters lie in the family's parameter space.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            Self::Bernoulli { p } if !(0.0..=1.0).contains(p) => bad(format!("bernoulli p = {p}")),
            Self::Categorical { probs } => {
                if probs.is_empty() || probs.iter().any(|w| !(*w >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad(format!("categorical probabilities {probs:?} must be non-negative and sum to 1"));
                }
                Ok(())
            }
            Self::Poisson { lambda } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                bad(format!("poisson lambda = {lambda}"))
            }
            Self::NegativeBinomial { kappa, .. } if !(*kappa > 1.0) => Err(Error::InvalidDispersion(*kappa)),
            Self::NegativeBinomial { mean, .. } if !(*mean > 0.0 && mean.is_finite()) => {
                bad(format!("negative binomial mean = {mean}"))
            }
            Self::Gaussian { mean, sd } if !(*sd > 0.0 && sd.is_finite() && mean.is_finite()) => {
                bad(format!("gaussian mean = {mean}, sd = {sd}"))
            }
            Self::GaussianMixture { weights, means, sds } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
                    return bad("mixture weights, means and sds must be non-empty and equal length".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad(format!("mixture weights {weights:?} must be non-negative and sum to 1"));
                }
                if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
                    return bad("mixture components need finite means and positive sds".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `(size r, success probability p)` with `r = mean / (kappa - 1)` and
    /// `p = 1 / kappa`, so that the mean is `r (1 - p) / p` and the variance is
    /// `kappa * mean`.
    pub fn negbin_size_prob(&self) -> Option<(f64, f64)> {
        match self {
            Self::NegativeBinomial { mean, kappa } => Some((mean / (kappa - 1.0), 1.0 / kappa)),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            Self::Bernoulli { .. } | Self::Categorical { .. } | Self::Poisson { .. } | Self::NegativeBinomial { .. }
        )
    }

    pub fn support(&self) -> Support {
        match self {
            Self::Bernoulli { .. } => Support::Binary,
            Self::Categorical { probs } => Support::Interval { upper: (probs.len() - 1) as f64 },
            Self::Poisson { .. } | Self::NegativeBinomial { .. } => Support::NonNegativeIntegers,
            _ => Support::RealLine,
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Self::Bernoulli { p } => match as_count(x) {
                Some(0) => (1.0 - p).ln(),
                Some(1) => p.ln(),
                _ => f64::NEG_INFINITY,
            },
            Self::Categorical { probs } => match as_count(x) {
                Some(k) if (k as usize) < probs.len() => probs[k as usize].ln(),
                _ => f64::NEG_INFINITY,
            },
            Self::Poisson { lambda } => match as_count(x) {
                Some(0) => -lambda,
                Some(k) if *lambda > 0.0 => k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0),
                _ => f64::NEG_INFINITY,
            },
            Self::NegativeBinomial { .. } => match as_count(x) {
                Some(k) => {
                    let (r, p) = self.negbin_size_prob().unwrap();
                    let k = k as f64;
                    ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0) + r * p.ln() + k * (1.0 - p).ln()
                }
                None => f64::NEG_INFINITY,
            },
            Self::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Self::GaussianMixture { weights, means, sds } => {
                let terms: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(sds)
                    .map(|((w, m), s)| {
                        let z = (x - m) / s;
                        w.ln() - 0.5 * z * z - s.ln() - LN_SQRT_2PI
                    })
                    .collect();
                log_sum_exp(&terms)
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Bernoulli { p } => {
                if t < 0.0 {
                    0.0
                } else if t < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Self::Categorical { .. } | Self::Poisson { .. } | Self::NegativeBinomial { .. } => {
                if t < 0.0 {
                    return 0.0;
                }
                let k = t.floor() as u64;
                (0..=k).map(|j| self.density(j as f64)).sum::<f64>().min(1.0)
            }
            Self::Gaussian { mean, sd } => std_normal_cdf((t - mean) / sd),
            Self::GaussianMixture { weights, means, sds } => weights
                .iter()
                .zip(means)
                .zip(sds)
                .map(|((w, m), s)| w * std_normal_cdf((t - m) / s))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Bernoulli { p } => *p,
            Self::Categorical { probs } => probs.iter().enumerate().map(|(k, w)| k as f64 * w).sum(),
            Self::Poisson { lambda } => *lambda,
            Self::NegativeBinomial { mean, .. } | Self::Gaussian { mean, .. } => *mean,
            Self::GaussianMixture { weights, means, .. } => weights.iter().zip(means).map(|(w, m)| w * m).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Bernoulli { p } => p * (1.0 - p),
            Self::Categorical { probs } => {
                let m = self.mean();
                probs.iter().enumerate().map(|(k, w)| w * (k as f64 - m).powi(2)).sum()
            }
            Self::Poisson { lambda } => *lambda,
            Self::NegativeBinomial { mean, kappa } => mean * kappa,
            Self::Gaussian { sd, .. } => sd * sd,
            Self::GaussianMixture { weights, means, sds } => {
                let m = self.mean();
                weights
                    .iter()
                    .zip(means)
                    .zip(sds)
                    .map(|((w, mu), s)| w * (s * s + mu * mu))
                    .sum::<f64>()
                    - m * m
            }
        }
    }

    /// Largest integer kept when a discrete support is truncated at
    /// [`TAIL_MASS`]. Meaningless for continuous laws (returns 0).
    pub fn discrete_upper(&self) -> u64 {
        match self {
            Self::Bernoulli { .. } => 1,
            Self::Categorical { probs } => (probs.len() - 1) as u64,
            Self::Poisson { lambda } if *lambda == 0.0 => 0,
            Self::Poisson { .. } | Self::NegativeBinomial { .. } => {
                // Past the mean the pmf ratio f(j+1)/f(j) is decreasing, so the
                // tail beyond k is at most f(k+1) / (1 - f(k+2)/f(k+1)).
                let mut k = self.mean().ceil() as u64;
                loop {
                    let a = self.log_density((k + 1) as f64);
                    let b = self.log_density((k + 2) as f64);
                    let ratio = (b - a).exp();
                    if ratio < 1.0 && a.exp() / (1.0 - ratio) < TAIL_MASS {
                        return k;
                    }
                    k += 1;
                }
            }
            _ => 0,
        }
    }

    /// Interval holding all but [`TAIL_MASS`] of the probability.
    pub fn effective_support(&self) -> (f64, f64) {
        let z = upper_quantile(TAIL_MASS / 2.0);
        match self {
            Self::Gaussian { mean, sd } => (mean - z * sd, mean + z * sd),
            Self::GaussianMixture { means, sds, .. } => means.iter().zip(sds).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), (m, s)| (lo.min(m - z * s), hi.max(m + z * s)),
            ),
            _ => (0.0, self.discrete_upper() as f64),
        }
    }

    /// Quadrature breakpoints around each Gaussian component.
    pub fn breakpoints(&self) -> Vec<f64> {
        let comps: Vec<(f64, f64)> = match self {
            Self::Gaussian { mean, sd } => vec![(*mean, *sd)],
            Self::GaussianMixture { means, sds, .. } => means.iter().copied().zip(sds.iter().copied()).collect(),
            _ => return Vec::new(),
        };
        let mut out = Vec::new();
        for (m, s) in comps {
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                out.push(m + k * s);
            }
        }
        out
    }

    /// Components `(weight, mean, sd)` of a Gaussian or Gaussian mixture.
    pub fn gaussian_components(&self) -> Option<Vec<(f64, f64, f64)>> {
        match self {
            Self::Gaussian { mean, sd } => Some(vec![(1.0, *mean, *sd)]),
            Self::GaussianMixture { weights, means, sds } => {
                Some(weights.iter().zip(means).zip(sds).map(|((w, m), s)| (*w, *m, *s)).collect())
            }
            _ => None,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Bernoulli { p } => (0..n).map(|_| if rng.random::<f64>() < *p { 1.0 } else { 0.0 }).collect(),
            Self::Categorical { probs } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    for (k, w) in probs.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            return k as f64;
                        }
                    }
                    probs.iter().rposition(|w| *w > 0.0).unwrap_or(0) as f64
                })
                .collect(),
            Self::Poisson { lambda } => {
                if *lambda == 0.0 {
                    return vec![0.0; n];
                }
                let d = PoissonDist::new(*lambda).expect("validated lambda");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::NegativeBinomial { mean, kappa } => {
                let g = Gamma::new(mean / (kappa - 1.0), kappa - 1.0).expect("validated dispersion");
                (0..n)
                    .map(|_| {
                        let rate = g.sample(rng);
                        if rate > 0.0 {
                            PoissonDist::new(rate).expect("positive rate").sample(rng)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Self::Gaussian { mean, sd } => {
                let d = Normal::new(*mean, *sd).expect("validated sd");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::GaussianMixture { weights, means, sds } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = weights.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            k = j;
                            break;
                        }
                    }
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    means[k] + sds[k] * z
                })
                .collect(),
        }
    }
}

/// A common integration domain for a set of laws sharing a dominating measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Counting measure on the listed points.
    Points(Vec<f64>),
    /// Lebesgue measure on `[lo, hi]`, with sorted interior breakpoints.
    Continuous { breaks: Vec<f64> },
}

impl Domain {
    pub fn of(laws: &[&Distribution]) -> Result<Domain> {
        let discrete = laws.iter().filter(|d| d.is_discrete()).count();
        if discrete == laws.len() {
            let hi = laws.iter().map(|d| d.discrete_upper()).max().unwrap_or(0);
            Ok(Domain::Points((0..=hi).map(|k| k as f64).collect()))
        } else if discrete == 0 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for d in laws {
                let (a, b) = d.effective_support();
                lo = lo.min(a);
                hi = hi.max(b);
            }
            let mut breaks = vec![lo, hi];
            for d in laws {
                breaks.extend(d.breakpoints().into_iter().filter(|x| *x > lo && *x < hi));
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            Ok(Domain::Continuous { breaks })
        } else {
            Err(Error::UnsupportedDomain("laws do not share a dominating measure".into()))
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Domain::Points(p) => (p[0], *p.last().unwrap()),
            Domain::Continuous { breaks } => (breaks[0], *breaks.last().unwrap()),
        }
    }

    /// Sum (counting measure) or integral (Lebesgue measure) of `f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Domain::Points(p) => p.iter().map(|&x| f(x)).sum(),
            Domain::Continuous { breaks } => integrate_pieces(f, breaks, QUAD_TOL),
        }
    }
}

/// Closed-form `∫ φ_{m1,s1}(x) φ_{m2,s2}(x) dx`.
pub(crate) fn gaussian_overlap(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let v = s1 * s1 + s2 * s2;
    (-(m1 - m2).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// The working model's parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    /// θ = (p).
    Bernoulli,
    /// θ = (λ).
    Poisson,
    /// θ = (mean) with fixed sd.
    GaussianLocation { sd: f64 },
    /// θ = (mean, sd).
    GaussianLocationScale,
}

/// Parameter space: a box or an explicit finite list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSpace {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Finite { points: Vec<Vec<f64>> },
}

/// Uniform grid resolution for box parameter spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_points")]
    pub points_per_dim: usize,
}

impl GridSpec {
    fn default_points() -> usize {
        400
    }

    pub fn uniform(points_per_dim: usize) -> Self {
        Self { points_per_dim }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points_per_dim: Self::default_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricFamily {
    pub kind: FamilyKind,
    pub space: ParameterSpace,
}

impl ParametricFamily {
    pub fn new(kind: FamilyKind, space: ParameterSpace) -> Result<Self> {
        let fam = Self { kind, space };
        fam.validate()?;
        Ok(fam)
    }

    pub fn bernoulli(lo: f64, hi: f64) -> Result<Self> {
        Self::new(FamilyKind::Bernoulli, ParameterSpace::Box { lower: vec![lo], upper: vec![hi] })
    }

    pub fn bernoulli_points(ps: &[f64]) -> Result<Self> {
        Self::new(FamilyKind::Bernoulli, ParameterSpace::Finite { points: ps.iter().map(|p| vec![*p]).collect() })
    }

    pub fn poisson(lo: f64, hi: f64) -> Result<Self> {
        Self::new(FamilyKind::Poisson, ParameterSpace::Box { lower: vec![lo], upper: vec![hi] })
    }

    pub fn gaussian_location(sd: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(FamilyKind::GaussianLocation { sd }, ParameterSpace::Box { lower: vec![lo], upper: vec![hi] })
    }

    pub fn gaussian_location_scale(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        Self::new(
            FamilyKind::GaussianLocationScale,
            ParameterSpace::Box { lower: lower.to_vec(), upper: upper.to_vec() },
        )
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FamilyKind::GaussianLocationScale => 2,
            _ => 1,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.space, ParameterSpace::Finite { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let FamilyKind::GaussianLocation { sd } = self.kind {
            if !(sd > 0.0) {
                return Err(Error::InvalidParameter(format!("gaussian location family sd = {sd}")));
            }
        }
        let d = self.dim();
        match &self.space {
            ParameterSpace::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::InvalidGrid(format!("box must have {d} coordinates")));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidGrid(format!("box lower {lower:?} exceeds upper {upper:?}")));
                }
                self.distribution_unchecked(lower).validate()?;
                self.distribution_unchecked(upper).validate()?;
            }
            ParameterSpace::Finite { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidGrid("finite parameter space is empty".into()));
                }
                for p in points {
                    if p.len() != d {
                        return Err(Error::InvalidGrid(format!("parameter {p:?} is not {d}-dimensional")));
                    }
                    self.distribution_unchecked(p).validate()?;
                }
            }
        }
        Ok(())
    }

    /// Bounding box of the parameter space.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.space {
            ParameterSpace::Box { lower, upper } => (lower.clone(), upper.clone()),
            ParameterSpace::Finite { points } => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in points {
                    for i in 0..d {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        match &self.space {
            ParameterSpace::Box { lower, upper } => {
                theta.iter().zip(lower.iter().zip(upper)).all(|(t, (l, u))| t >= l && t <= u)
            }
            ParameterSpace::Finite { points } => points.iter().any(|p| p.as_slice() == theta),
        }
    }

    fn distribution_unchecked(&self, theta: &[f64]) -> Distribution {
        match self.kind {
            FamilyKind::Bernoulli => Distribution::Bernoulli { p: theta[0] },
            FamilyKind::Poisson => Distribution::Poisson { lambda: theta[0] },
            FamilyKind::GaussianLocation { sd } => Distribution::Gaussian { mean: theta[0], sd },
            FamilyKind::GaussianLocationScale => Distribution::Gaussian { mean: theta[0], sd: theta[1] },
        }
    }

    /// The member law at parameter `theta`.
    pub fn distribution(&self, theta: &[f64]) -> Result<Distribution> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidParameter(format!("expected {} coordinates, got {theta:?}", self.dim())));
        }
        let d = self.distribution_unchecked(theta);
        d.validate()?;
        Ok(d)
    }

    /// Grid points in lexicographic order. Finite spaces return their points
    /// sorted lexicographically and ignore `spec`.
    pub fn grid(&self, spec: &GridSpec) -> Result<Vec<Vec<f64>>> {
        match &self.space {
            ParameterSpace::Finite { points } => {
                let mut pts = points.clone();
                pts.sort_by(|a, b| lex_cmp(a, b));
                pts.dedup();
                Ok(pts)
            }
            ParameterSpace::Box { lower, upper } => {
                let m = spec.points_per_dim;
                if m == 0 {
                    return Err(Error::InvalidGrid("grid needs at least one point per dimension".into()));
                }
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| {
                        if m == 1 || l == u {
                            vec![l]
                        } else {
                            (0..m).map(|i| l + (u - l) * i as f64 / (m - 1) as f64).collect()
                        }
                    })
                    .collect();
                let mut out = vec![Vec::new()];
                for axis in &axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn categorical_basics() {
        let d = Distribution::categorical(vec![0.1, 0.0, 0.6, 0.3]).unwrap();
        assert!((d.density(2.0) - 0.6).abs() < 1e-15);
        assert_eq!(d.density(1.0), 0.0);
        assert_eq!(d.density(4.0), 0.0);
        assert!((d.cdf(2.5) - 0.7).abs() < 1e-15);
        assert!((d.mean() - 2.1).abs() < 1e-12);
        assert!((d.variance() - (0.6 * 4.0 + 0.3 * 9.0 - 2.1 * 2.1)).abs() < 1e-12);
        let xs = d.sample(100_000, 4);
        let twos = xs.iter().filter(|&&x| x == 2.0).count() as f64 / 1e5;
        assert!((twos - 0.6).abs() < 0.01);
        assert!(xs.iter().all(|&x| x != 1.0));
        assert!(Distribution::categorical(vec![0.5, 0.6]).is_err());
        assert!(Distribution::categorical(vec![]).is_err());
    }

    fn total_mass(d: &Distribution) -> f64 {
        Domain::of(&[d]).unwrap().integrate(|x| d.density(x))
    }

    #[test]
    fn log_density_examples() {
        let b = Distribution::bernoulli(0.5).unwrap();
        assert!((b.log_density(1.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(Distribution::bernoulli(0.0).unwrap().log_density(1.0), f64::NEG_INFINITY);
        let fact10: f64 = (1..=10u64).product::<u64>() as f64;
        let oracle = -10.0 + 10.0 * 10f64.ln() - fact10.ln();
        let got = Distribution::poisson(10.0).unwrap().log_density(10.0);
        assert!((got - oracle).abs() < 1e-12);
        assert!((got + 2.0785).abs() < 1e-4);
    }

    #[test]
    fn cdf_examples() {
        assert!((Distribution::gaussian(0.0, 1.0).unwrap().cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((Distribution::bernoulli(0.3).unwrap().cdf(0.5) - 0.7).abs() < 1e-15);
        let mix = Distribution::mixture(vec![0.99, 0.01], vec![0.0, 0.0], vec![1.0, 30.0]).unwrap();
        assert!((mix.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negbin_mapping() {
        assert_eq!(negbin_from_mean_dispersion(10.0, 1.0), Err(Error::InvalidDispersion(1.0)));
        let d = negbin_from_mean_dispersion(10.0, 4.0).unwrap();
        assert_eq!(d.variance(), 40.0);
        // Moment summation over the truncated support.
        for kappa in [1.0001, 4.0] {
            let d = negbin_from_mean_dispersion(10.0, kappa).unwrap();
            let dom = Domain::of(&[&d]).unwrap();
            let m = dom.integrate(|x| x * d.density(x));
            let v = dom.integrate(|x| (x - m).powi(2) * d.density(x));
            assert!((m - 10.0).abs() < 1e-8, "{m}");
            assert!((v - 10.0 * kappa).abs() < 1e-7, "{v}");
        }
    }

    #[test]
    fn sampling_moments() {
        assert_eq!(Distribution::bernoulli(0.0).unwrap().sample(5, 17), vec![0.0; 5]);
        let n = 1_000_000;
        let xs = negbin_from_mean_dispersion(10.0, 4.0).unwrap().sample(n, 3);
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((v / 40.0 - 1.0).abs() < 0.01, "{v}");
        assert!((m - 10.0).abs() < 4.0 * (40.0 / n as f64).sqrt());
        let xs = Distribution::gaussian(2.0, 1.0).unwrap().sample(n, 5);
        let m = xs.iter().sum::<f64>() / n as f64;
        assert!((m - 2.0).abs() < 4e-3);
        let p = Distribution::poisson(3.5).unwrap().sample(n, 9);
        let m = p.iter().sum::<f64>() / n as f64;
        assert!((m - 3.5).abs() < 4.0 * (3.5 / n as f64).sqrt());
        let mix = Distribution::mixture(vec![0.7, 0.3], vec![-1.0, 4.0], vec![1.0, 2.0]).unwrap();
        let xs = mix.sample(n, 11);
        let m = xs.iter().sum::<f64>() / n as f64;
        assert!((m - mix.mean()).abs() < 4.0 * (mix.variance() / n as f64).sqrt());
    }

    #[test]
    fn mixture_mass_with_wide_component() {
        let mix = Distribution::mixture(vec![0.99, 0.01], vec![0.0, 0.0], vec![1.0, 30.0]).unwrap();
        assert!((total_mass(&mix) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn family_grid_and_bounds() {
        let f = ParametricFamily::gaussian_location_scale([-1.0, 0.5], [1.0, 2.0]).unwrap();
        let g = f.grid(&GridSpec::uniform(3)).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, 0.5]);
        assert_eq!(g[1], vec![-1.0, 1.25]);
        assert_eq!(g[8], vec![1.0, 2.0]);
        let fin = ParametricFamily::bernoulli_points(&[0.5, 0.0]).unwrap();
        assert_eq!(fin.grid(&GridSpec::default()).unwrap(), vec![vec![0.0], vec![0.5]]);
        assert!(ParametricFamily::bernoulli(0.0, 1.5).is_err());
        assert!(ParametricFamily::gaussian_location_scale([0.0, 0.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn serde_literal() {
        let d: Distribution =
            serde_json::from_str(r#"{"family":"gaussian_mixture","weights":[0.99,0.01],"means":[0,0],"sds":[1,30]}"#)
                .unwrap();
        assert!(matches!(d, Distribution::GaussianMixture { .. }));
        assert!(serde_json::from_str::<Distribution>(r#"{"family":"bernoulli","p":0.2,"q":1}"#).is_err());
    }

    fn arb_law() -> impl Strategy<Value = Distribution> {
        prop_oneof![
            (0.0..=1.0f64).prop_map(|p| Distribution::Bernoulli { p }),
            (0.0..40.0f64).prop_map(|lambda| Distribution::Poisson { lambda }),
            (0.5..30.0f64, 1.01..8.0f64).prop_map(|(mean, kappa)| Distribution::NegativeBinomial { mean, kappa }),
            (-5.0..5.0f64, 0.1..10.0f64).prop_map(|(mean, sd)| Distribution::Gaussian { mean, sd }),
            (0.0..1.0f64, -5.0..5.0f64, -5.0..5.0f64, 0.2..5.0f64, 0.2..30.0f64).prop_map(|(w, m1, m2, s1, s2)| {
                Distribution::GaussianMixture { weights: vec![w, 1.0 - w], means: vec![m1, m2], sds: vec![s1, s2] }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn density_normalizes(d in arb_law()) {
            prop_assert!((total_mass(&d) - 1.0).abs() < 1e-6);
        }

        #[test]
        fn cdf_matches_density(d in arb_law()) {
            let (lo, hi) = d.effective_support();
            let dom = Domain::of(&[&d]).unwrap();
            for i in 0..50 {
                let t = lo + (hi - lo) * (i as f64 + 0.37) / 50.0;
                let partial = match &dom {
                    Domain::Points(p) => p.iter().filter(|&&x| x <= t).map(|&x| d.density(x)).sum::<f64>(),
                    Domain::Continuous { breaks } => {
                        let mut b: Vec<f64> = breaks.iter().copied().filter(|&x| x < t).collect();
                        b.push(t);
                        if b.len() < 2 { 0.0 } else { integrate_pieces(|x| d.density(x), &b, QUAD_TOL) }
                    }
                };
                prop_assert!((partial - d.cdf(t)).abs() < 1e-8, "t={} {} vs {}", t, partial, d.cdf(t));
            }
        }

        #[test]
        fn sampling_is_deterministic(d in arb_law(), seed in any::<u64>()) {
            let a = d.sample(64, seed);
            let b = d.sample(64, seed);
            prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
