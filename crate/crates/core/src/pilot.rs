//! Pilot estimators fit on the held-out half of the data.

use crate::distributions::{Distribution, FamilyKind, GridSpec, ParameterSpace, ParametricFamily};
use crate::divergences::kernel::{embedding_inner, mean_embedding};
use crate::divergences::{power_integral, DivergenceTag};
use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::numeric::optimize::{golden_section, nelder_mead};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const FIT_TOL: f64 = 1e-6;
const MAX_BINS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PilotSpec {
    Mle,
    /// Minimizes an empirical version of `divergence` over the family.
    MinDistance {
        divergence: DivergenceTag,
        #[serde(default = "default_coarse")]
        coarse_points: usize,
    },
}

fn default_coarse() -> usize {
    101
}

impl PilotSpec {
    pub fn min_distance(divergence: DivergenceTag) -> Self {
        PilotSpec::MinDistance { divergence, coarse_points: default_coarse() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PilotSpec::Mle => Ok(()),
            PilotSpec::MinDistance { divergence, coarse_points } => {
                divergence.validate()?;
                if *coarse_points < 2 {
                    return Err(Error::InvalidParameter("pilot coarse grid needs at least 2 points".into()));
                }
                Ok(())
            }
        }
    }

    pub fn fit(&self, family: &ParametricFamily, data: &[f64]) -> Result<PilotFit> {
        match self {
            PilotSpec::Mle => fit_mle(family, data),
            PilotSpec::MinDistance { divergence, coarse_points } => {
                fit_min_distance_with(family, data, divergence, *coarse_points)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            PilotSpec::Mle => "mle".into(),
            PilotSpec::MinDistance { divergence, .. } => format!("mde:{}", divergence.name()),
        }
    }
}

/// A fitted pilot: its parameter, law and the attained criterion value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotFit {
    pub theta: Vec<f64>,
    pub distribution: Distribution,
    pub criterion: f64,
}

fn check_data(family: &ParametricFamily, data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    for &x in data {
        let ok = x.is_finite()
            && match family.kind {
                FamilyKind::Bernoulli => x == 0.0 || x == 1.0,
                FamilyKind::Poisson => x >= 0.0 && x.fract() == 0.0,
                _ => true,
            };
        if !ok {
            return Err(Error::InvalidParameter(format!("observation {x} is outside the family's support")));
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn log_likelihood(d: &Distribution, data: &[f64]) -> f64 {
    data.iter().map(|&x| d.log_density(x)).sum()
}

fn finalize(family: &ParametricFamily, theta: Vec<f64>, criterion: f64) -> Result<PilotFit> {
    let distribution = family.distribution(&theta)?;
    Ok(PilotFit { theta, distribution, criterion })
}

/// Best point of a finite space; the first (lexicographically smallest) wins ties.
fn best_finite<F: Fn(&Distribution) -> f64>(family: &ParametricFamily, f: F) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for theta in family.grid(&GridSpec::default())? {
        let v = f(&family.distribution(&theta)?);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((theta, v));
        }
    }
    best.ok_or_else(|| Error::InvalidGrid("empty parameter space".into()))
}

/// Maximum likelihood over the family. Box spaces use the closed-form
/// maximizer clamped to the box (each log-likelihood is unimodal per
/// coordinate); finite spaces are searched exhaustively.
pub fn fit_mle(family: &ParametricFamily, data: &[f64]) -> Result<PilotFit> {
    check_data(family, data)?;
    let n = data.len() as f64;
    let theta = match &family.space {
        ParameterSpace::Finite { .. } => {
            let (theta, v) = best_finite(family, |d| -log_likelihood(d, data))?;
            return finalize(family, theta, v / n);
        }
        ParameterSpace::Box { lower, upper } => {
            let m = mean(data);
            match family.kind {
                FamilyKind::Bernoulli | FamilyKind::Poisson | FamilyKind::GaussianLocation { .. } => {
                    vec![m.clamp(lower[0], upper[0])]
                }
                FamilyKind::GaussianLocationScale => {
                    let mu = m.clamp(lower[0], upper[0]);
                    let sd = (data.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
                    vec![mu, sd.clamp(lower[1], upper[1])]
                }
            }
        }
    };
    let d = family.distribution(&theta)?;
    let nll = -log_likelihood(&d, data) / n;
    Ok(PilotFit { theta, distribution: d, criterion: nll })
}

/// Empirical pmf of integer-valued data.
fn empirical_pmf(data: &[f64]) -> BTreeMap<i64, f64> {
    let mut counts = BTreeMap::new();
    for &x in data {
        *counts.entry(x as i64).or_insert(0.0) += 1.0;
    }
    let n = data.len() as f64;
    counts.values_mut().for_each(|c| *c /= n);
    counts
}

/// Freedman-Diaconis histogram: `(edges, densities)`.
fn histogram(data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let quantile = |q: f64| {
        let pos = q * (n - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < n {
            xs[i] * (1.0 - frac) + xs[i + 1] * frac
        } else {
            xs[n - 1]
        }
    };
    let (lo, hi) = (xs[0], xs[n - 1]);
    let range = hi - lo;
    let iqr = quantile(0.75) - quantile(0.25);
    let mut width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) {
        width = if range > 0.0 { range / (n as f64).sqrt() } else { 1.0 };
    }
    let bins = ((range / width).ceil() as usize).clamp(1, MAX_BINS);
    let (lo, hi) = if range > 0.0 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
    let mut counts = vec![0.0; bins];
    for &x in &xs {
        let j = (((x - lo) / w) as usize).min(bins - 1);
        counts[j] += 1.0;
    }
    let dens = counts.iter().map(|c| c / (n as f64 * w)).collect();
    (edges, dens)
}

type Criterion<'a> = Box<dyn Fn(&Distribution) -> f64 + Sync + 'a>;

/// Empirical criterion `theta -> value` to be minimized.
fn criterion<'a>(
    family: &'a ParametricFamily,
    data: &'a [f64],
    rho: &DivergenceTag,
) -> Result<Criterion<'a>> {
    let discrete = matches!(family.kind, FamilyKind::Bernoulli | FamilyKind::Poisson);
    let n = data.len() as f64;
    Ok(match *rho {
        DivergenceTag::Kl => Box::new(move |d| -log_likelihood(d, data) / n),
        DivergenceTag::Dp { beta } => Box::new(move |d| {
            let Ok(ip) = power_integral(d, beta) else { return f64::INFINITY };
            let avg = data.iter().map(|&x| (beta * d.log_density(x)).exp()).sum::<f64>() / n;
            ip - (1.0 + 1.0 / beta) * avg
        }),
        DivergenceTag::Hellinger if discrete => {
            let pmf = empirical_pmf(data);
            Box::new(move |d| -pmf.iter().map(|(&k, &w)| (w * d.density(k as f64)).sqrt()).sum::<f64>())
        }
        DivergenceTag::Tv if discrete => {
            let pmf = empirical_pmf(data);
            Box::new(move |d| 1.0 - pmf.iter().map(|(&k, &w)| w.min(d.density(k as f64))).sum::<f64>())
        }
        DivergenceTag::Hellinger => {
            let (edges, dens) = histogram(data);
            Box::new(move |d| {
                let aff: f64 = edges
                    .windows(2)
                    .zip(&dens)
                    .filter(|(_, &h)| h > 0.0)
                    .map(|(e, &h)| integrate(|x| (h * d.density(x)).sqrt(), e[0], e[1], 1e-10))
                    .sum();
                -aff
            })
        }
        DivergenceTag::Tv => {
            let (edges, dens) = histogram(data);
            Box::new(move |d| {
                let overlap: f64 = edges
                    .windows(2)
                    .zip(&dens)
                    .filter(|(_, &h)| h > 0.0)
                    .map(|(e, &h)| integrate(|x| h.min(d.density(x)), e[0], e[1], 1e-10))
                    .sum();
                1.0 - overlap
            })
        }
        DivergenceTag::Wasserstein1 { .. } => {
            let mut xs = data.to_vec();
            xs.sort_by(f64::total_cmp);
            Box::new(move |d| w1_to_empirical(d, &xs, discrete))
        }
        DivergenceTag::Mmd { kernel } => {
            let kernel = kernel.resolve(data);
            Box::new(move |d| {
                let Ok(pp) = embedding_inner(&kernel, d, d) else { return f64::INFINITY };
                let mut cross = 0.0;
                for &x in data {
                    match mean_embedding(&kernel, d, x) {
                        Ok(v) => cross += v,
                        Err(_) => return f64::INFINITY,
                    }
                }
                pp - 2.0 * cross / n
            })
        }
    })
}

/// `int |F_n - F_theta|` against the sorted sample `xs`.
fn w1_to_empirical(d: &Distribution, xs: &[f64], discrete: bool) -> f64 {
    let n = xs.len() as f64;
    let (lo, hi) = d.effective_support();
    if discrete {
        let top = (xs[xs.len() - 1].max(hi)) as i64;
        let mut j = 0;
        let mut total = 0.0;
        for k in 0..=top {
            while j < xs.len() && xs[j] <= k as f64 {
                j += 1;
            }
            total += (j as f64 / n - d.cdf(k as f64)).abs();
        }
        return total;
    }
    let mut breaks = vec![lo.min(xs[0])];
    breaks.extend_from_slice(xs);
    breaks.push(hi.max(xs[xs.len() - 1]));
    let mut total = 0.0;
    for (i, w) in breaks.windows(2).enumerate() {
        if w[1] > w[0] {
            let fn_val = i as f64 / n;
            total += integrate(|t| (fn_val - d.cdf(t)).abs(), w[0], w[1], 1e-9);
        }
    }
    total
}

/// Minimum-distance estimator for `rho` with the default coarse grid.
pub fn fit_min_distance(family: &ParametricFamily, data: &[f64], rho: &DivergenceTag) -> Result<PilotFit> {
    fit_min_distance_with(family, data, rho, default_coarse())
}

/// Coarse grid search followed by golden-section (1D) or Nelder-Mead (2D)
/// refinement around the best grid point.
pub fn fit_min_distance_with(
    family: &ParametricFamily,
    data: &[f64],
    rho: &DivergenceTag,
    coarse_points: usize,
) -> Result<PilotFit> {
    check_data(family, data)?;
    rho.validate()?;
    let crit = criterion(family, data, rho)?;
    let objective = |theta: &[f64]| match family.distribution(theta) {
        Ok(d) => {
            let v = crit(&d);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        }
        Err(_) => f64::INFINITY,
    };
    if family.is_finite() {
        let (theta, v) = best_finite(family, |d| crit(d))?;
        return finalize(family, theta, v);
    }
    let points_per_dim = if family.dim() == 1 { coarse_points } else { coarse_points.min(41) };
    let grid = family.grid(&GridSpec::uniform(points_per_dim))?;
    let mut best = (grid[0].clone(), objective(&grid[0]));
    for theta in &grid[1..] {
        let v = objective(theta);
        if v < best.1 {
            best = (theta.clone(), v);
        }
    }
    let (lo, hi) = family.bounds();
    let cell: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / (points_per_dim.max(2) - 1) as f64).collect();
    let (theta, value) = if family.dim() == 1 {
        let a = (best.0[0] - cell[0]).max(lo[0]);
        let b = (best.0[0] + cell[0]).min(hi[0]);
        let (x, fx) = golden_section(|x| objective(&[x]), a, b, FIT_TOL * 0.1);
        (vec![x], fx)
    } else {
        let scale: Vec<f64> = cell.iter().map(|c| c.max(FIT_TOL)).collect();
        nelder_mead(objective, &best.0, &lo, &hi, &scale, 1e-12, 4000)
    };
    let (theta, value) = if value < best.1 { (theta, value) } else { best };
    finalize(family, theta, value)
}
