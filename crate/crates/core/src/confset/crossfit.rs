//! Cross-fit set: both halves take turns as the evaluation sample.

use super::{EvalData, GridRow, Provenance, Representation, SplitSample, ConfidenceSet};
use crate::distributions::{Distribution, ParametricFamily};
use crate::error::{Error, Result};
use crate::numeric::normal::upper_quantile;
use crate::pilot::{PilotFit, PilotSpec};
use crate::relfit::{noise, PairStatistic, StatisticSample, StatisticSpec};
use rayon::prelude::*;

/// Pilots fit on each half, with the statistic evaluated on the other.
#[derive(Debug, Clone)]
pub struct Crossfit {
    pub family: ParametricFamily,
    pub statistic: StatisticSpec,
    pub alpha: f64,
    pub pilot_spec: PilotSpec,
    /// Fit on `d1`, evaluated on `d0`.
    pub pilot1: PilotFit,
    /// Fit on `d0`, evaluated on `d1`.
    pub pilot0: PilotFit,
    pub split: SplitSample,
    eval0: EvalData,
    eval1: EvalData,
    noise0: Vec<f64>,
    noise1: Vec<f64>,
}

impl Crossfit {
    pub fn new(
        family: &ParametricFamily,
        data: &[f64],
        split: &SplitSample,
        pilot: &PilotSpec,
        statistic: &StatisticSpec,
        alpha: f64,
    ) -> Result<Self> {
        statistic.validate()?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let (x0, x1) = (split.eval_half(data), split.pilot_half(data));
        let pilot1 = pilot.fit(family, &x1)?;
        let pilot0 = pilot.fit(family, &x0)?;
        let mut statistic = *statistic;
        statistic.divergence = statistic.divergence.resolve(data);
        let seed = split.noise_seed();
        Ok(Crossfit {
            family: family.clone(),
            statistic,
            alpha,
            pilot_spec: *pilot,
            pilot1,
            pilot0,
            split: split.clone(),
            noise0: noise(x0.len(), seed),
            noise1: noise(x1.len(), seed.rotate_left(17) ^ 0xbb67_ae85_84ca_a73b),
            eval0: EvalData::new(x0),
            eval1: EvalData::new(x1),
        })
    }

    fn half(&self, candidate: &Distribution, pilot: &PilotFit, eval: &EvalData, z: &[f64]) -> Result<StatisticSample> {
        let pair = PairStatistic::new(&self.statistic.divergence, candidate, &pilot.distribution)?;
        let values = eval.statistic(&pair)?;
        Ok(StatisticSample::with_noise(values, self.statistic.delta, z, 0)?.with_diagonal(pair.is_diagonal()))
    }

    /// Accept iff `(n0 Tbar_0 + n1 Tbar_1) / n <= z_alpha s / sqrt(n)` with
    /// `s^2` the average of the two corrupted variances.
    pub fn test(&self, theta: &[f64]) -> Result<GridRow> {
        let candidate = self.family.distribution(theta)?;
        let a = self.half(&candidate, &self.pilot1, &self.eval0, &self.noise0)?;
        let b = self.half(&candidate, &self.pilot0, &self.eval1, &self.noise1)?;
        let (n0, n1) = (a.n0() as f64, b.n0() as f64);
        let n = n0 + n1;
        let mean = (n0 * a.mean + n1 * b.mean) / n;
        let sd = (0.5 * (a.sd * a.sd + b.sd * b.sd)).sqrt();
        let threshold = upper_quantile(self.alpha) * sd / n.sqrt();
        let row = |statistic: f64, threshold: f64, accept: bool| GridRow { theta: theta.to_vec(), statistic, threshold, accept };
        if a.diagonal && b.diagonal {
            return Ok(row(0.0, threshold, true));
        }
        if !mean.is_finite() {
            return Ok(row(mean, f64::NAN, mean == f64::NEG_INFINITY));
        }
        if self.statistic.delta == 0.0 && sd == 0.0 {
            return Err(Error::DegenerateVariance);
        }
        Ok(row(mean, threshold, mean <= threshold))
    }

    pub fn invert(&self, grid: &[Vec<f64>]) -> Result<ConfidenceSet> {
        if grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let rows = grid.par_iter().map(|t| self.test(t)).collect::<Result<Vec<_>>>()?;
        let mask = rows.iter().map(|r| r.accept).collect();
        Ok(ConfidenceSet {
            representation: Representation::GridMask { points: grid.to_vec(), mask },
            provenance: Provenance {
                statistic: self.statistic,
                rule: "crossfit_redi_normal".into(),
                alpha: self.alpha,
                pilot: self.pilot_spec.name(),
                pilot_theta: self.pilot1.theta.clone(),
                split_seed: self.split.seed,
                noise_seed: self.split.noise_seed(),
                n0: self.split.n0(),
                n1: self.split.n1(),
            },
            rows,
        })
    }
}

pub fn crossfit_set(
    family: &ParametricFamily,
    grid: &[Vec<f64>],
    data: &[f64],
    split: &SplitSample,
    pilot: &PilotSpec,
    statistic: &StatisticSpec,
    alpha: f64,
) -> Result<ConfidenceSet> {
    Crossfit::new(family, data, split, pilot, statistic, alpha)?.invert(grid)
}
