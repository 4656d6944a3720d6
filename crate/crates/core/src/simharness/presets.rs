//! Ready-made experiments: the two-point Bernoulli examples, the
//! overdispersed Poisson sweep and the Gaussian contamination cases.

use super::{run_experiment, CoverageReport, ExperimentConfig, SetMethod};
use crate::bounds::{RuleKind, ThresholdRule};
use crate::distributions::{negbin_from_mean_dispersion, Distribution, GridSpec, ParametricFamily};
use crate::divergences::DivergenceTag;
use crate::error::Result;
use crate::pilot::PilotSpec;
use crate::relfit::StatisticSpec;
use serde::{Deserialize, Serialize};

/// Replicates used by default outside full-fidelity runs.
pub const CI_REPLICATES: usize = 300;
/// Replicates of the full-fidelity runs.
pub const FULL_REPLICATES: usize = 1000;
/// Dispersion ratios of the overdispersion sweep.
pub const KAPPA_SWEEP: [f64; 5] = [1.01, 2.0, 3.0, 5.0, 8.0];

/// A statistic, threshold rule and pilot that together define a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pipeline {
    Slrt,
    KlRedi,
    HellingerRedi,
    TvRedi,
    DpRedi { beta: f64 },
    DpHoeffding { beta: f64 },
}

impl Pipeline {
    pub fn name(&self) -> String {
        match self {
            Pipeline::Slrt => "slrt".into(),
            Pipeline::KlRedi => "kl_redi".into(),
            Pipeline::HellingerRedi => "hellinger_redi".into(),
            Pipeline::TvRedi => "tv_redi".into(),
            Pipeline::DpRedi { beta } => format!("dp_redi(beta={beta})"),
            Pipeline::DpHoeffding { beta } => format!("dp_hoeffding(beta={beta})"),
        }
    }

    pub fn parts(&self, alpha: f64) -> Result<(StatisticSpec, ThresholdRule, PilotSpec)> {
        let redi = ThresholdRule::redi_normal(alpha)?;
        Ok(match *self {
            Pipeline::Slrt => (StatisticSpec::new(DivergenceTag::Kl).with_delta(0.0), ThresholdRule::slrt(alpha)?, PilotSpec::Mle),
            Pipeline::KlRedi => (StatisticSpec::new(DivergenceTag::Kl), redi, PilotSpec::Mle),
            Pipeline::HellingerRedi => (
                StatisticSpec::new(DivergenceTag::Hellinger),
                redi,
                PilotSpec::min_distance(DivergenceTag::Hellinger),
            ),
            Pipeline::TvRedi => (StatisticSpec::new(DivergenceTag::Tv), redi, PilotSpec::min_distance(DivergenceTag::Tv)),
            Pipeline::DpRedi { beta } => {
                let tag = DivergenceTag::Dp { beta };
                (StatisticSpec::new(tag), redi, PilotSpec::min_distance(tag))
            }
            Pipeline::DpHoeffding { beta } => {
                let tag = DivergenceTag::Dp { beta };
                let rule = ThresholdRule::new(RuleKind::Hoeffding { b: 1.0 + 1.0 / beta }, alpha)?;
                (StatisticSpec::new(tag), rule, PilotSpec::min_distance(tag))
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn config(
        &self,
        name: &str,
        truth: Distribution,
        family: ParametricFamily,
        grid: GridSpec,
        n: usize,
        alpha: f64,
        replicates: usize,
        seed: u64,
    ) -> Result<ExperimentConfig> {
        let (statistic, rule, pilot) = self.parts(alpha)?;
        Ok(ExperimentConfig {
            name: format!("{name}/{}", self.name()),
            truth,
            family,
            statistic,
            rule,
            pilot,
            n,
            replicates,
            seed,
            grid,
            split_ratio: super::DEFAULT_SPLIT,
            nu: None,
            method: SetMethod::Split,
            metrics: true,
        })
    }
}

fn two_point(points: &[f64]) -> Result<ParametricFamily> {
    ParametricFamily::bernoulli_points(points)
}

/// Truth `Bern(eps_scale / n)` on the model `{Bern(0), Bern(1/2)}`: the split
/// LRT, the DP set with Hoeffding threshold and the Hellinger ReDI set.
pub fn example1_configs(n: usize, alpha: f64, eps_scale: f64, replicates: usize, seed: u64) -> Result<Vec<ExperimentConfig>> {
    let truth = Distribution::bernoulli(eps_scale / n as f64)?;
    let fam = two_point(&[0.0, 0.5])?;
    [Pipeline::Slrt, Pipeline::DpHoeffding { beta: 1.0 }, Pipeline::HellingerRedi]
        .iter()
        .map(|p| p.config("example1", truth.clone(), fam.clone(), GridSpec::default(), n, alpha, replicates, seed))
        .collect()
}

pub fn example1_regression(n: usize, alpha: f64, eps_scale: f64, replicates: usize, seed: u64) -> Result<Vec<CoverageReport>> {
    example1_configs(n, alpha, eps_scale, replicates, seed)?.iter().map(run_experiment).collect()
}

/// Truth `Bern(1/2 + c/n)` on `{Bern(1/4), Bern(3/4)}`: split LRT against KL ReDI.
pub fn example2_configs(n: usize, alpha: f64, c: f64, replicates: usize, seed: u64) -> Result<Vec<ExperimentConfig>> {
    let truth = Distribution::bernoulli(0.5 + c / n as f64)?;
    let fam = two_point(&[0.25, 0.75])?;
    [Pipeline::Slrt, Pipeline::KlRedi]
        .iter()
        .map(|p| p.config("example2", truth.clone(), fam.clone(), GridSpec::default(), n, alpha, replicates, seed))
        .collect()
}

pub fn example2_regression(n: usize, alpha: f64, c: f64, replicates: usize, seed: u64) -> Result<Vec<CoverageReport>> {
    example2_configs(n, alpha, c, replicates, seed)?.iter().map(run_experiment).collect()
}

/// Poisson model on `[0.5, 30]` for a negative binomial truth with mean 10.
pub fn poisson_family() -> Result<ParametricFamily> {
    ParametricFamily::poisson(0.5, 30.0)
}

pub fn overdispersion_config(kappa: f64, n: usize, replicates: usize, seed: u64, pipeline: Pipeline) -> Result<ExperimentConfig> {
    let truth = negbin_from_mean_dispersion(10.0, kappa)?;
    pipeline.config(&format!("overdispersion(kappa={kappa})"), truth, poisson_family()?, GridSpec::default(), n, 0.05, replicates, seed)
}

/// The four overdispersion pipelines over [`KAPPA_SWEEP`].
pub fn overdispersion_sweep(n: usize, replicates: usize, seed: u64) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for kappa in KAPPA_SWEEP {
        for p in [Pipeline::Slrt, Pipeline::KlRedi, Pipeline::HellingerRedi, Pipeline::TvRedi] {
            out.push(overdispersion_config(kappa, n, replicates, seed, p)?);
        }
    }
    Ok(out)
}

/// Contaminated Gaussian truths; `case` is 1 (symmetric), 2 (asymmetric) or
/// 3 (heavily asymmetric).
pub fn contamination_truth(case: u8) -> Result<Distribution> {
    match case {
        1 => Distribution::mixture(vec![0.99, 0.01], vec![0.0, 0.0], vec![1.0, 30.0]),
        2 => Distribution::mixture(vec![0.94, 0.01, 0.05], vec![0.0, 20.0, -30.0], vec![1.0, 20.0, 20.0]),
        3 => Distribution::mixture(vec![0.7, 0.2, 0.1], vec![2.0, -2.0, 0.0], vec![1.0, 1.0, 30.0]),
        c => Err(crate::error::Error::InvalidConfig(format!("contamination case must be 1, 2 or 3, got {c}"))),
    }
}

/// Gaussian location-scale model on `[-4, 4] x [0.25, 12]`.
pub fn location_scale_family() -> Result<ParametricFamily> {
    ParametricFamily::gaussian_location_scale([-4.0, 0.25], [4.0, 12.0])
}

pub fn contamination_config(case: u8, n: usize, replicates: usize, seed: u64, pipeline: Pipeline) -> Result<ExperimentConfig> {
    pipeline.config(
        &format!("contamination(case={case})"),
        contamination_truth(case)?,
        location_scale_family()?,
        GridSpec::uniform(81),
        n,
        0.05,
        replicates,
        seed,
    )
}

/// Case 1 with the split LRT, KL ReDI and DP ReDI sets.
pub fn contamination_suite(case: u8, n: usize, replicates: usize, seed: u64) -> Result<Vec<ExperimentConfig>> {
    [Pipeline::Slrt, Pipeline::KlRedi, Pipeline::DpRedi { beta: 0.5 }]
        .iter()
        .map(|p| contamination_config(case, n, replicates, seed, *p))
        .collect()
}
