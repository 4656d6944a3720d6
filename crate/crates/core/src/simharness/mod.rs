//! Monte Carlo coverage experiments.
//!
//! Each replicate draws a fresh dataset from the truth, builds a confidence
//! set and records whether it covers the projection `P~` and whether it meets
//! the approximate projection set `P~_nu`. Replicates run in parallel and are
//! reduced in index order, so results depend only on the master seed.

pub mod presets;
mod report;

pub use report::{write_report_csv, write_summary_json, Summary};

use crate::bounds::ThresholdRule;
use crate::confset::{split, ConfidenceSet, Crossfit, RelativeFit, Representation, VarianceSource, DEFAULT_SPLIT};
use crate::distributions::{Distribution, GridSpec, ParametricFamily};
use crate::divergences::projection::grid_values;
use crate::divergences::{approx_projection_set, rho_hausdorff_values, Anchored, ApproxSet, DivergenceTag};
use crate::error::{Error, Result};
use crate::pilot::PilotSpec;
use crate::relfit::StatisticSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMethod {
    #[default]
    Split,
    Crossfit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub truth: Distribution,
    pub family: ParametricFamily,
    pub statistic: StatisticSpec,
    pub rule: ThresholdRule,
    pub pilot: PilotSpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    /// Slack for the approximate projection set; the statistic's `nu` if absent.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub method: SetMethod,
    /// Invert the full grid each replicate for size metrics.
    #[serde(default = "default_true")]
    pub metrics: bool,
}

fn default_split() -> f64 {
    DEFAULT_SPLIT
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        self.family.validate()?;
        self.statistic.validate()?;
        self.rule.validate()?;
        self.pilot.validate()?;
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.n < 4 {
            return Err(Error::InvalidConfig(format!("n must be at least 4, got {}", self.n)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!("split ratio {} outside (0, 1)", self.split_ratio)));
        }
        if let Some(nu) = self.nu {
            if !(nu >= 1.0) {
                return Err(Error::InvalidConfig(format!("nu must be at least 1, got {nu}")));
            }
        }
        Ok(())
    }
}

/// Size metrics of one set relative to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub size: usize,
    pub empty: bool,
    /// rho-Hausdorff excess to `{P~}`; infinite for an empty set.
    pub hausdorff_projection: f64,
    /// rho-Hausdorff excess to `P~_nu`; infinite for an empty set.
    pub hausdorff_approx: f64,
    /// `sup_{P in C} rho(P* || P)`.
    pub sup_divergence: f64,
    /// Largest pairwise Euclidean distance between member parameters.
    pub l2_width: f64,
}

fn l2_width(points: &[&Vec<f64>]) -> f64 {
    if points.first().is_some_and(|p| p.len() == 1) {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return (hi - lo).max(0.0);
    }
    let mut w: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            w = w.max(d);
        }
    }
    w
}

/// Metrics from divergence values aligned with the set's grid.
fn metrics_from_values(set: &ConfidenceSet, values: &[f64], projection_value: f64, approx_values: &[f64]) -> Result<SetMetrics> {
    let Representation::GridMask { points, mask } = &set.representation else {
        return Err(Error::InvalidSet("metrics need a grid-mask set".into()));
    };
    let member_values: Vec<f64> = values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
    let member_points: Vec<&Vec<f64>> = points.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| p).collect();
    if member_values.is_empty() {
        return Ok(SetMetrics {
            size: 0,
            empty: true,
            hausdorff_projection: f64::INFINITY,
            hausdorff_approx: f64::INFINITY,
            sup_divergence: f64::NAN,
            l2_width: 0.0,
        });
    }
    Ok(SetMetrics {
        size: member_values.len(),
        empty: false,
        hausdorff_projection: rho_hausdorff_values(&member_values, &[projection_value])?,
        hausdorff_approx: rho_hausdorff_values(&member_values, approx_values)?,
        sup_divergence: member_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        l2_width: l2_width(&member_points),
    })
}

/// Size metrics of a grid-mask set for truth `pstar` under `rho`.
pub fn metrics(
    set: &ConfidenceSet,
    pstar: &Distribution,
    family: &ParametricFamily,
    rho: &DivergenceTag,
    approx: &ApproxSet,
) -> Result<SetMetrics> {
    let Representation::GridMask { points, .. } = &set.representation else {
        return Err(Error::InvalidSet("metrics need a grid-mask set".into()));
    };
    let anchored = Anchored::new(rho, pstar)?;
    let values = points.iter().map(|t| anchored.to(&family.distribution(t)?)).collect::<Result<Vec<f64>>>()?;
    metrics_from_values(set, &values, approx.projection.value, &approx.values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub covered: bool,
    pub approx_covered: bool,
    pub pilot_theta: Vec<f64>,
    /// Statistic and threshold of the test at the projection.
    pub statistic: f64,
    pub threshold: f64,
    pub metrics: Option<SetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub name: String,
    pub replicates: usize,
    pub seed: u64,
    pub projection_theta: Vec<f64>,
    pub projection_value: f64,
    pub approx_set: Vec<Vec<f64>>,
    pub nu: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub approx_coverage: f64,
    pub approx_coverage_se: f64,
    pub median_hausdorff_projection: Option<f64>,
    pub median_hausdorff_approx: Option<f64>,
    pub median_width: Option<f64>,
    pub median_size: Option<f64>,
    pub empty_sets: usize,
    pub rows: Vec<ReplicateRow>,
}

/// `sqrt(p (1 - p) / r)`.
pub fn mc_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { 0.5 * (xs[m - 1] + xs[m]) })
}

enum Tester {
    Split(RelativeFit),
    Cross(Crossfit),
}

impl Tester {
    fn test(&self, theta: &[f64]) -> Result<crate::confset::GridRow> {
        match self {
            Tester::Split(f) => f.test(theta),
            Tester::Cross(c) => c.test(theta),
        }
    }

    fn pilot_theta(&self) -> Vec<f64> {
        match self {
            Tester::Split(f) => f.pilot.theta.clone(),
            Tester::Cross(c) => c.pilot1.theta.clone(),
        }
    }

    fn invert(&self, grid: &[Vec<f64>]) -> Result<ConfidenceSet> {
        match self {
            Tester::Split(f) => f.invert(grid),
            Tester::Cross(c) => c.invert(grid),
        }
    }
}

/// Projection and approximate projection set of an experiment's truth.
pub fn targets(cfg: &ExperimentConfig) -> Result<ApproxSet> {
    let nu = cfg.nu.unwrap_or(cfg.statistic.nu);
    approx_projection_set(&cfg.statistic.divergence, &cfg.truth, &cfg.family, nu, &cfg.grid)
}

/// Runs all replicates. The projection and `P~_nu` are computed once from the
/// truth; coverage tests the projection parameter itself, and approximate
/// coverage also accepts any tested member of `P~_nu`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let approx = targets(cfg)?;
    let target = approx.projection.theta.clone();
    let (grid, grid_vals) = if cfg.metrics {
        grid_values(&cfg.statistic.divergence, &cfg.truth, &cfg.family, &cfg.grid)?
    } else {
        (Vec::new(), Vec::new())
    };
    let variance = if cfg.rule.kind.needs_variance() {
        VarianceSource::Oracle { truth: cfg.truth.clone() }
    } else {
        VarianceSource::Rule
    };
    let rows = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<ReplicateRow> {
            let seed = replicate_seed(cfg.seed, r as u64);
            let data = cfg.truth.sample(cfg.n, seed);
            let sp = split(cfg.n, cfg.split_ratio, splitmix64(seed ^ 0x5851_f42d_4c95_7f2d))?;
            let tester = match cfg.method {
                SetMethod::Split => Tester::Split(
                    RelativeFit::new(&cfg.family, &data, &sp, &cfg.pilot, &cfg.statistic, &cfg.rule)?
                        .with_variance(variance.clone()),
                ),
                SetMethod::Crossfit => {
                    Tester::Cross(Crossfit::new(&cfg.family, &data, &sp, &cfg.pilot, &cfg.statistic, cfg.rule.alpha)?)
                }
            };
            let at_target = tester.test(&target)?;
            let mut approx_covered = at_target.accept;
            for p in &approx.points {
                if approx_covered {
                    break;
                }
                approx_covered = tester.test(p)?.accept;
            }
            let metrics = if cfg.metrics {
                let set = tester.invert(&grid)?;
                Some(metrics_from_values(&set, &grid_vals, approx.projection.value, &approx.values)?)
            } else {
                None
            };
            Ok(ReplicateRow {
                replicate: r,
                seed,
                covered: at_target.accept,
                approx_covered,
                pilot_theta: tester.pilot_theta(),
                statistic: at_target.statistic,
                threshold: at_target.threshold,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r = rows.len();
    let coverage = rows.iter().filter(|x| x.covered).count() as f64 / r as f64;
    let approx_coverage = rows.iter().filter(|x| x.approx_covered).count() as f64 / r as f64;
    let ms: Vec<SetMetrics> = rows.iter().filter_map(|x| x.metrics).collect();
    let nonempty: Vec<&SetMetrics> = ms.iter().filter(|m| !m.empty).collect();
    let pick = |f: fn(&SetMetrics) -> f64| median(nonempty.iter().map(|m| f(m)).collect());
    Ok(CoverageReport {
        name: cfg.name.clone(),
        replicates: r,
        seed: cfg.seed,
        projection_theta: target,
        projection_value: approx.projection.value,
        approx_set: approx.points.clone(),
        nu: approx.nu,
        coverage,
        coverage_se: mc_se(coverage, r),
        approx_coverage,
        approx_coverage_se: mc_se(approx_coverage, r),
        median_hausdorff_projection: pick(|m| m.hausdorff_projection),
        median_hausdorff_approx: pick(|m| m.hausdorff_approx),
        median_width: pick(|m| m.l2_width),
        median_size: if ms.is_empty() { None } else { median(ms.iter().map(|m| m.size as f64).collect()) },
        empty_sets: ms.iter().filter(|m| m.empty).count(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confset::GridRow;

    #[test]
    fn seeds_are_stable() {
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
        assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
    }

    #[test]
    fn mc_standard_error() {
        assert!((mc_se(0.5, 100) - 0.05).abs() < 1e-15);
        assert_eq!(mc_se(1.0, 10), 0.0);
    }

    fn mask_set(points: Vec<Vec<f64>>, mask: Vec<bool>) -> ConfidenceSet {
        let fam = ParametricFamily::bernoulli(0.0, 1.0).unwrap();
        let stat = StatisticSpec::new(DivergenceTag::Kl);
        let data = vec![0.0, 1.0, 0.0, 1.0];
        let sp = split(4, 0.5, 0).unwrap();
        let fit = RelativeFit::new(&fam, &data, &sp, &PilotSpec::Mle, &stat, &ThresholdRule::redi_normal(0.05).unwrap()).unwrap();
        ConfidenceSet {
            representation: Representation::GridMask { points, mask },
            provenance: fit.provenance(),
            rows: Vec::<GridRow>::new(),
        }
    }

    #[test]
    fn metric_examples() {
        let truth = Distribution::bernoulli(0.3).unwrap();
        let fam = ParametricFamily::bernoulli(0.0, 1.0).unwrap();
        let rho = DivergenceTag::Kl;
        let approx = approx_projection_set(&rho, &truth, &fam, 1.0, &GridSpec::uniform(11)).unwrap();
        let grid = fam.grid(&GridSpec::uniform(11)).unwrap();

        let mut mask = vec![false; 11];
        mask[3] = true;
        let m = metrics(&mask_set(grid.clone(), mask), &truth, &fam, &rho, &approx).unwrap();
        assert_eq!(m.hausdorff_projection, 0.0);
        assert_eq!(m.l2_width, 0.0);

        let m = metrics(&mask_set(grid.clone(), vec![true; 11]), &truth, &fam, &rho, &approx).unwrap();
        assert!((m.l2_width - 1.0).abs() < 1e-15);
        assert_eq!(m.hausdorff_projection, f64::INFINITY);

        let mut mask = vec![false; 11];
        mask[2] = true;
        mask[5] = true;
        let m = metrics(&mask_set(grid.clone(), mask), &truth, &fam, &rho, &approx).unwrap();
        let kl = |q: f64| 0.3 * (0.3f64 / q).ln() + 0.7 * (0.7f64 / (1.0 - q)).ln();
        assert!((m.hausdorff_projection - (kl(0.5) - kl(0.3))).abs() < 1e-10);
        assert!((m.l2_width - 0.3).abs() < 1e-12);

        let m = metrics(&mask_set(grid, vec![false; 11]), &truth, &fam, &rho, &approx).unwrap();
        assert!(m.empty && m.hausdorff_projection.is_infinite() && m.l2_width == 0.0);
    }

    #[test]
    fn experiment_is_reproducible() {
        let cfg = presets::overdispersion_config(3.0, 100, 20, 5, presets::Pipeline::KlRedi).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.projection_theta[0] - 10.0).abs() < 1e-3);
        assert!(a.rows.iter().all(|r| r.metrics.is_some()));
    }
}
