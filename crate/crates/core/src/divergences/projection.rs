//! Projections of a truth onto a parametric family.

use super::{Anchored, DivergenceTag};
use crate::distributions::{lex_cmp, Distribution, GridSpec, ParametricFamily};
use crate::error::{Error, Result};
use crate::numeric::optimize::{golden_section, nelder_mead};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const PARAM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Minimizer after local refinement.
    pub theta: Vec<f64>,
    /// `rho(P* || P_theta)` at the minimizer.
    pub value: f64,
    /// Best grid point and its value before refinement.
    pub grid_theta: Vec<f64>,
    pub grid_value: f64,
    pub grid_size: usize,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSet {
    pub nu: f64,
    pub projection: ProjectionResult,
    /// Members in lexicographic order; includes the projection itself.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl ApproxSet {
    pub fn contains(&self, theta: &[f64]) -> bool {
        self.points.iter().any(|p| p.as_slice() == theta)
    }
}

/// Divergence from `pstar` to every grid point, in parallel.
pub fn grid_values(
    rho: &DivergenceTag,
    pstar: &Distribution,
    family: &ParametricFamily,
    grid: &GridSpec,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let points = family.grid(grid)?;
    if points.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    let anchored = Anchored::new(rho, pstar)?;
    let values = points
        .par_iter()
        .map(|t| anchored.to(&family.distribution(t)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok((points, values))
}

fn grid_argmin(points: &[Vec<f64>], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..points.len() {
        let better = values[i] < values[best]
            || (values[i] == values[best] && lex_cmp(&points[i], &points[best]).is_lt());
        if better {
            best = i;
        }
    }
    best
}

fn refine(
    anchored: &Anchored,
    family: &ParametricFamily,
    start: &[f64],
    start_value: f64,
    grid: &GridSpec,
) -> (Vec<f64>, f64) {
    let (lo, hi) = family.bounds();
    let objective = |t: &[f64]| -> f64 {
        match family.distribution(t).and_then(|d| anchored.to(&d)) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::INFINITY,
        }
    };
    let m = grid.points_per_dim.max(2) as f64 - 1.0;
    let cell: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / m).collect();
    let (theta, value) = if family.dim() == 1 {
        let a = (start[0] - cell[0]).max(lo[0]);
        let b = (start[0] + cell[0]).min(hi[0]);
        let (x, fx) = golden_section(|x| objective(&[x]), a, b, PARAM_TOL * 0.1);
        (vec![x], fx)
    } else {
        nelder_mead(objective, start, &lo, &hi, &cell, 1e-14, 4000)
    };
    if value < start_value {
        (theta, value)
    } else {
        (start.to_vec(), start_value)
    }
}

fn project_from(
    rho: &DivergenceTag,
    pstar: &Distribution,
    family: &ParametricFamily,
    grid: &GridSpec,
    points: &[Vec<f64>],
    values: &[f64],
) -> Result<ProjectionResult> {
    let i = grid_argmin(points, values);
    let (grid_theta, grid_value) = (points[i].clone(), values[i]);
    let (theta, value) = if family.is_finite() || !grid_value.is_finite() {
        (grid_theta.clone(), grid_value)
    } else {
        let anchored = Anchored::new(rho, pstar)?;
        refine(&anchored, family, &grid_theta, grid_value, grid)
    };
    Ok(ProjectionResult {
        refined: theta != grid_theta,
        theta,
        value,
        grid_theta,
        grid_value,
        grid_size: points.len(),
    })
}

/// Minimizes `rho(P* || P_theta)` over the grid and then refines locally.
/// Ties go to the lexicographically smallest parameter.
pub fn project(
    rho: &DivergenceTag,
    pstar: &Distribution,
    family: &ParametricFamily,
    grid: &GridSpec,
) -> Result<ProjectionResult> {
    let (points, values) = grid_values(rho, pstar, family, grid)?;
    project_from(rho, pstar, family, grid, &points, &values)
}

/// Grid points within a factor `nu` of the minimal divergence, plus the
/// projection itself.
pub fn approx_projection_set(
    rho: &DivergenceTag,
    pstar: &Distribution,
    family: &ParametricFamily,
    nu: f64,
    grid: &GridSpec,
) -> Result<ApproxSet> {
    if !(nu >= 1.0) {
        return Err(Error::InvalidParameter(format!("nu must be at least 1, got {nu}")));
    }
    let (points, values) = grid_values(rho, pstar, family, grid)?;
    let projection = project_from(rho, pstar, family, grid, &points, &values)?;
    let cut = nu * projection.value;
    let slack = 1e-12 * cut.abs().max(1e-300);
    let mut members: Vec<(Vec<f64>, f64)> = points
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v <= cut + slack)
        .collect();
    if !members.iter().any(|(p, _)| *p == projection.theta) {
        members.push((projection.theta.clone(), projection.value));
        members.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    }
    let (points, values) = members.into_iter().unzip();
    Ok(ApproxSet { nu, projection, points, values })
}

/// Directed excess-divergence Hausdorff distance from divergence values of
/// `S0` to those of `S1`. The `eps`-fattening of `S1` holds every parameter
/// whose divergence is within `eps` of some member of `S1`, so the smallest
/// covering `eps` is `max_{S0} rho - max_{S1} rho`, clamped at zero.
pub fn rho_hausdorff_values(s0: &[f64], s1: &[f64]) -> Result<f64> {
    if s0.is_empty() || s1.is_empty() {
        return Err(Error::InvalidSet("rho-Hausdorff needs non-empty sets".into()));
    }
    let hi = s0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = s1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(0.0);
    }
    Ok((hi - lo).max(0.0))
}

pub fn rho_hausdorff(
    s0: &[Vec<f64>],
    s1: &[Vec<f64>],
    pstar: &Distribution,
    rho: &DivergenceTag,
    family: &ParametricFamily,
) -> Result<f64> {
    if s0.is_empty() || s1.is_empty() {
        return Err(Error::InvalidSet("rho-Hausdorff needs non-empty sets".into()));
    }
    let anchored = Anchored::new(rho, pstar)?;
    let eval = |s: &[Vec<f64>]| -> Result<Vec<f64>> {
        s.iter().map(|t| anchored.to(&family.distribution(t)?)).collect()
    };
    rho_hausdorff_values(&eval(s0)?, &eval(s1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::negbin_from_mean_dispersion;

    fn two_point() -> ParametricFamily {
        ParametricFamily::bernoulli_points(&[0.0, 0.5]).unwrap()
    }

    #[test]
    fn kl_projection_of_negbin_is_mean() {
        let fam = ParametricFamily::poisson(0.5, 30.0).unwrap();
        for kappa in [1.5, 3.0, 4.0, 6.0] {
            let truth = negbin_from_mean_dispersion(10.0, kappa).unwrap();
            let r = project(&DivergenceTag::Kl, &truth, &fam, &GridSpec::default()).unwrap();
            assert!((r.theta[0] - 10.0).abs() < 1e-3, "kappa {kappa}: {:?}", r.theta);
            assert!(r.value <= r.grid_value);
        }
    }

    #[test]
    fn dp_switch_point() {
        for beta in [0.25, 1.0, 2.0] {
            let cut = (1.0 - 0.5f64.powf(beta)) / (1.0 + beta);
            for (eps, expect) in [(cut * 0.98, 0.0), (cut * 1.02, 0.5)] {
                let truth = Distribution::bernoulli(eps).unwrap();
                let r = project(&DivergenceTag::Dp { beta }, &truth, &two_point(), &GridSpec::default()).unwrap();
                assert_eq!(r.theta, vec![expect], "beta {beta} eps {eps}");
            }
        }
    }

    #[test]
    fn hellinger_projection_and_approx_sets() {
        let nu = (3.0 + 2.0 * 2f64.sqrt()).sqrt();
        let grid = GridSpec::default();
        let at = |eps: f64| Distribution::bernoulli(eps).unwrap();
        let r = project(&DivergenceTag::Hellinger, &at(0.1), &two_point(), &grid).unwrap();
        assert_eq!(r.theta, vec![0.0]);
        let s = approx_projection_set(&DivergenceTag::Hellinger, &at(0.04), &two_point(), nu, &grid).unwrap();
        assert_eq!(s.points, vec![vec![0.0]]);
        let s = approx_projection_set(&DivergenceTag::Hellinger, &at(0.10), &two_point(), nu, &grid).unwrap();
        assert_eq!(s.points, vec![vec![0.0], vec![0.5]]);
        assert_eq!(project(&DivergenceTag::Hellinger, &at(0.14), &two_point(), &grid).unwrap().theta, vec![0.0]);
        assert_eq!(project(&DivergenceTag::Hellinger, &at(0.15), &two_point(), &grid).unwrap().theta, vec![0.5]);
    }

    #[test]
    fn nu_one_is_singleton() {
        let fam = ParametricFamily::poisson(0.5, 30.0).unwrap();
        let truth = negbin_from_mean_dispersion(10.0, 2.0).unwrap();
        let s = approx_projection_set(&DivergenceTag::Hellinger, &truth, &fam, 1.0, &GridSpec::uniform(101)).unwrap();
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0], s.projection.theta);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let fam = ParametricFamily::poisson(0.5, 30.0).unwrap();
        let truth = Distribution::poisson(3.0).unwrap();
        assert!(matches!(
            project(&DivergenceTag::Kl, &truth, &fam, &GridSpec::uniform(0)),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn hausdorff_values() {
        assert!((rho_hausdorff_values(&[0.5], &[0.2]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(rho_hausdorff_values(&[0.2, 0.1], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(rho_hausdorff_values(&[0.1], &[0.4]).unwrap(), 0.0);
        assert!((rho_hausdorff_values(&[0.1, 0.6], &[0.2, 0.4]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(rho_hausdorff_values(&[], &[0.4]), Err(Error::InvalidSet(_))));
        let fam = ParametricFamily::poisson(0.5, 30.0).unwrap();
        let truth = Distribution::poisson(3.0).unwrap();
        let s = vec![vec![2.0], vec![5.0]];
        assert_eq!(rho_hausdorff(&s, &s, &truth, &DivergenceTag::Tv, &fam).unwrap(), 0.0);
    }
}
