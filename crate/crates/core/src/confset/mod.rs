//! Confidence sets from inverting split-sample tests of relative fit.

mod crossfit;
mod rays;

pub use crossfit::{crossfit_set, Crossfit};
pub use rays::{invert_rays, ray_directions, star_violations, RaySearch, DEFAULT_RAYS};

use crate::bounds::{Decision, ThresholdRule};
use crate::distributions::{Distribution, ParametricFamily};
use crate::divergences::{divergence, DivergenceTag};
use crate::error::{Error, Result};
use crate::pilot::{PilotFit, PilotSpec};
use crate::relfit::{noise, PairStatistic, StatisticSample, StatisticSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default fraction of the data used for evaluation.
pub const DEFAULT_SPLIT: f64 = 0.5;

/// Disjoint evaluation (`d0`) and pilot (`d1`) index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSample {
    pub d0: Vec<usize>,
    pub d1: Vec<usize>,
    pub seed: u64,
}

impl SplitSample {
    pub fn n0(&self) -> usize {
        self.d0.len()
    }

    pub fn n1(&self) -> usize {
        self.d1.len()
    }

    pub fn eval_half(&self, data: &[f64]) -> Vec<f64> {
        self.d0.iter().map(|&i| data[i]).collect()
    }

    pub fn pilot_half(&self, data: &[f64]) -> Vec<f64> {
        self.d1.iter().map(|&i| data[i]).collect()
    }

    /// Seed for the corruption noise on the evaluation half.
    pub fn noise_seed(&self) -> u64 {
        self.seed ^ 0x6a09_e667_f3bc_c909
    }
}

/// Shuffles `0..n` with `seed` and puts the first `floor(ratio * n)` indices
/// in `d0`. Both halves are returned in increasing index order.
pub fn split(n: usize, ratio: f64, seed: u64) -> Result<SplitSample> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let n0 = (ratio * n as f64).floor() as usize;
    if n0 < 2 || n - n0 < 1 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut d0 = idx[..n0].to_vec();
    let mut d1 = idx[n0..].to_vec();
    d0.sort_unstable();
    d1.sort_unstable();
    Ok(SplitSample { d0, d1, seed })
}

/// Where the Bernstein and Bentkus rules get their variance bound `S`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceSource {
    /// The `S` stored in the rule.
    #[default]
    Rule,
    /// `S^2 = (c1 nu)^2 [rho(P* || P) + rho(P* || pilot)]` with known truth `P*`
    /// (squared Hellinger distance for the Hellinger statistic).
    Oracle { truth: Distribution },
}

/// One row of a grid inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub theta: Vec<f64>,
    pub statistic: f64,
    pub threshold: f64,
    pub accept: bool,
}

impl GridRow {
    fn new(theta: Vec<f64>, d: Decision) -> Self {
        GridRow { theta, statistic: d.statistic, threshold: d.threshold, accept: d.accept }
    }
}

/// How a set was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub statistic: StatisticSpec,
    pub rule: String,
    pub alpha: f64,
    pub pilot: String,
    pub pilot_theta: Vec<f64>,
    pub split_seed: u64,
    pub noise_seed: u64,
    pub n0: usize,
    pub n1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    GridMask { points: Vec<Vec<f64>>, mask: Vec<bool> },
    StarConvex {
        center: Vec<f64>,
        directions: Vec<Vec<f64>>,
        radii: Vec<f64>,
        /// Rays that reached the parameter box without a rejection.
        clamped: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub representation: Representation,
    pub provenance: Provenance,
    /// Per-point diagnostics of a grid inversion; not serialized.
    #[serde(skip)]
    pub rows: Vec<GridRow>,
}

impl ConfidenceSet {
    /// Accepted grid points (empty for star-convex sets).
    pub fn members(&self) -> Vec<Vec<f64>> {
        match &self.representation {
            Representation::GridMask { points, mask } => {
                points.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| p.clone()).collect()
            }
            Representation::StarConvex { .. } => Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        match &self.representation {
            Representation::GridMask { mask, .. } => mask.iter().filter(|&&m| m).count(),
            Representation::StarConvex { radii, .. } => radii.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.representation {
            Representation::GridMask { mask, .. } => !mask.iter().any(|&m| m),
            Representation::StarConvex { .. } => false,
        }
    }

    /// Grid masks use nearest-grid-point membership, with coordinates scaled
    /// by the grid's extent. Star-convex sets interpolate the boundary radius
    /// between neighbouring rays.
    pub fn contains(&self, theta: &[f64]) -> bool {
        match &self.representation {
            Representation::GridMask { points, mask } => {
                nearest_index(points, theta).is_some_and(|i| mask[i])
            }
            Representation::StarConvex { center, directions, radii, .. } => {
                rays::star_contains(center, directions, radii, theta)
            }
        }
    }
}

pub(crate) fn nearest_index(points: &[Vec<f64>], theta: &[f64]) -> Option<usize> {
    let d = theta.len();
    let mut scale = vec![1.0; d];
    for (k, s) in scale.iter_mut().enumerate() {
        let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            *s = 1.0 / (hi - lo);
        }
    }
    let dist = |p: &[f64]| -> f64 { p.iter().zip(theta).zip(&scale).map(|((a, b), s)| ((a - b) * s).powi(2)).sum() };
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let v = dist(p);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Evaluation-half data with repeated values grouped, so discrete samples
/// evaluate each statistic once per distinct observation.
#[derive(Debug, Clone)]
pub(crate) struct EvalData {
    pub values: Vec<f64>,
    unique: Vec<f64>,
    index: Vec<usize>,
}

impl EvalData {
    pub fn new(values: Vec<f64>) -> Self {
        let mut map: HashMap<u64, usize> = HashMap::new();
        let mut unique = Vec::new();
        let index = values
            .iter()
            .map(|&x| {
                *map.entry(x.to_bits()).or_insert_with(|| {
                    unique.push(x);
                    unique.len() - 1
                })
            })
            .collect();
        EvalData { values, unique, index }
    }

    pub fn statistic(&self, pair: &PairStatistic) -> Result<Vec<f64>> {
        if self.unique.len() * 2 > self.values.len() {
            return pair.values(&self.values);
        }
        let at = pair.values(&self.unique)?;
        Ok(self.index.iter().map(|&i| at[i]).collect())
    }
}

pub(crate) fn variance_bound(
    source: &VarianceSource,
    statistic: &StatisticSpec,
    candidate: &Distribution,
    pilot: &Distribution,
) -> Result<Option<f64>> {
    let VarianceSource::Oracle { truth } = source else { return Ok(None) };
    let rho = |q: &Distribution| -> Result<f64> {
        let v = divergence(&statistic.divergence, truth, q)?;
        Ok(if matches!(statistic.divergence, DivergenceTag::Hellinger) { v * v } else { v })
    };
    let s2 = (statistic.c1 * statistic.nu).powi(2) * (rho(candidate)? + rho(pilot)?);
    Ok(Some(s2.sqrt()))
}

/// A fitted split-sample test that can be evaluated at any parameter.
#[derive(Debug, Clone)]
pub struct RelativeFit {
    pub family: ParametricFamily,
    pub statistic: StatisticSpec,
    pub rule: ThresholdRule,
    pub variance: VarianceSource,
    pub pilot_spec: PilotSpec,
    pub pilot: PilotFit,
    pub split: SplitSample,
    eval: EvalData,
    noise: Vec<f64>,
    noise_seed: u64,
}

impl RelativeFit {
    /// Fits the pilot on `d1` and prepares the test on `d0`. Data-dependent
    /// divergence settings (the MMD bandwidth) are resolved on `d1`.
    pub fn new(
        family: &ParametricFamily,
        data: &[f64],
        split: &SplitSample,
        pilot: &PilotSpec,
        statistic: &StatisticSpec,
        rule: &ThresholdRule,
    ) -> Result<Self> {
        statistic.validate()?;
        rule.validate()?;
        pilot.validate()?;
        if split.d0.iter().chain(&split.d1).any(|&i| i >= data.len()) {
            return Err(Error::InvalidParameter("split indices exceed the data length".into()));
        }
        let d1 = split.pilot_half(data);
        let fit = pilot.fit(family, &d1)?;
        let mut statistic = *statistic;
        statistic.divergence = statistic.divergence.resolve(&d1);
        let eval = EvalData::new(split.eval_half(data));
        let noise_seed = split.noise_seed();
        let noise = noise(eval.values.len(), noise_seed);
        Ok(RelativeFit {
            family: family.clone(),
            statistic,
            rule: *rule,
            variance: VarianceSource::Rule,
            pilot_spec: *pilot,
            pilot: fit,
            split: split.clone(),
            eval,
            noise,
            noise_seed,
        })
    }

    pub fn with_variance(mut self, variance: VarianceSource) -> Self {
        self.variance = variance;
        self
    }

    pub fn n0(&self) -> usize {
        self.eval.values.len()
    }

    /// `T(X_i; P, pilot)` over the evaluation half, summarized.
    pub fn sample(&self, candidate: &Distribution) -> Result<StatisticSample> {
        let pair = PairStatistic::new(&self.statistic.divergence, candidate, &self.pilot.distribution)?;
        let values = self.eval.statistic(&pair)?;
        Ok(StatisticSample::with_noise(values, self.statistic.delta, &self.noise, self.noise_seed)?
            .with_diagonal(pair.is_diagonal()))
    }

    pub fn decide(&self, candidate: &Distribution) -> Result<Decision> {
        let sample = self.sample(candidate)?;
        let rule = match variance_bound(&self.variance, &self.statistic, candidate, &self.pilot.distribution)? {
            Some(s) => self.rule.with_variance(s),
            None => self.rule,
        };
        rule.decide(&sample)
    }

    pub fn test(&self, theta: &[f64]) -> Result<GridRow> {
        let d = self.decide(&self.family.distribution(theta)?)?;
        Ok(GridRow::new(theta.to_vec(), d))
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            statistic: self.statistic,
            rule: self.rule.kind.name().into(),
            alpha: self.rule.alpha,
            pilot: self.pilot_spec.name(),
            pilot_theta: self.pilot.theta.clone(),
            split_seed: self.split.seed,
            noise_seed: self.noise_seed,
            n0: self.split.n0(),
            n1: self.split.n1(),
        }
    }

    /// Tests every grid point in parallel; rows keep the grid order.
    pub fn invert(&self, grid: &[Vec<f64>]) -> Result<ConfidenceSet> {
        if grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let rows = grid.par_iter().map(|t| self.test(t)).collect::<Result<Vec<_>>>()?;
        let mask = rows.iter().map(|r| r.accept).collect();
        Ok(ConfidenceSet {
            representation: Representation::GridMask { points: grid.to_vec(), mask },
            provenance: self.provenance(),
            rows,
        })
    }
}

/// Grid inversion of the split-sample test.
pub fn invert_grid(
    family: &ParametricFamily,
    grid: &[Vec<f64>],
    data: &[f64],
    split: &SplitSample,
    pilot: &PilotSpec,
    statistic: &StatisticSpec,
    rule: &ThresholdRule,
) -> Result<ConfidenceSet> {
    RelativeFit::new(family, data, split, pilot, statistic, rule)?.invert(grid)
}

/// The split likelihood-ratio baseline: KL statistic, threshold `log(1/alpha)/n0`.
pub fn slrt_rule(alpha: f64) -> Result<ThresholdRule> {
    ThresholdRule::slrt(alpha)
}

/// Split LRT set over `grid` with an MLE pilot.
pub fn slrt(
    family: &ParametricFamily,
    grid: &[Vec<f64>],
    data: &[f64],
    split: &SplitSample,
    alpha: f64,
) -> Result<ConfidenceSet> {
    let stat = StatisticSpec::new(DivergenceTag::Kl).with_delta(0.0);
    invert_grid(family, grid, data, split, &PilotSpec::Mle, &stat, &slrt_rule(alpha)?)
}
