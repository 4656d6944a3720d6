//! Star-convex sets found by root-finding along rays from the pilot.

use super::{ConfidenceSet, RelativeFit, Representation, SplitSample};
use crate::bounds::ThresholdRule;
use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::numeric::brent;
use crate::pilot::PilotSpec;
use crate::relfit::StatisticSpec;
use rayon::prelude::*;
use std::f64::consts::PI;

pub const DEFAULT_RAYS: usize = 64;
const ROOT_TOL: f64 = 1e-8;

/// Unit directions: `+-1` in one dimension; `(sin w, -cos w)` with
/// `w_k = -pi + 2 pi k / n` in two.
pub fn ray_directions(dim: usize, n_rays: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => {
            if n_rays < 3 {
                return Err(Error::InvalidParameter(format!("need at least 3 rays in 2D, got {n_rays}")));
            }
            Ok((0..n_rays)
                .map(|k| {
                    let w = -PI + 2.0 * PI * k as f64 / n_rays as f64;
                    vec![w.sin(), -w.cos()]
                })
                .collect())
        }
        d => Err(Error::InvalidParameter(format!("ray search supports 1 or 2 dimensions, got {d}"))),
    }
}

fn box_exit(center: &[f64], dir: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut r = f64::INFINITY;
    for k in 0..center.len() {
        if dir[k] > 0.0 {
            r = r.min((upper[k] - center[k]) / dir[k]);
        } else if dir[k] < 0.0 {
            r = r.min((lower[k] - center[k]) / dir[k]);
        }
    }
    r.max(0.0)
}

pub(crate) fn star_contains(center: &[f64], directions: &[Vec<f64>], radii: &[f64], theta: &[f64]) -> bool {
    let v: Vec<f64> = theta.iter().zip(center).map(|(a, b)| a - b).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return true;
    }
    let radius = if center.len() == 1 {
        let k = directions.iter().position(|d| d[0].signum() == v[0].signum());
        match k {
            Some(k) => radii[k],
            None => return false,
        }
    } else {
        let n = radii.len();
        let w = v[0].atan2(-v[1]);
        let pos = (w + PI) / (2.0 * PI / n as f64);
        let k = (pos.floor() as usize) % n;
        let t = pos - pos.floor();
        (1.0 - t) * radii[k] + t * radii[(k + 1) % n]
    };
    norm <= radius * (1.0 + 1e-12)
}

/// Ray search around the fitted pilot of a [`RelativeFit`].
#[derive(Debug, Clone)]
pub struct RaySearch {
    pub n_rays: usize,
    /// Defaults to the diagonal of the parameter box.
    pub r_max: Option<f64>,
}

impl Default for RaySearch {
    fn default() -> Self {
        RaySearch { n_rays: DEFAULT_RAYS, r_max: None }
    }
}

impl RaySearch {
    /// Along each ray, doubles the radius from `r_max / 64` until the test
    /// rejects, then locates the crossing of `statistic - threshold` by
    /// Brent's method. Rays that reach the box boundary without a rejection
    /// are clamped there.
    pub fn run(&self, fit: &RelativeFit) -> Result<ConfidenceSet> {
        let family = &fit.family;
        let center = fit.pilot.theta.clone();
        if !family.contains(&center) {
            return Err(Error::InvalidCenter(center));
        }
        let (lower, upper) = family.bounds();
        let diag = lower.iter().zip(&upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt();
        let r_max = self.r_max.unwrap_or(diag);
        if !(r_max > 0.0) {
            return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
        }
        let directions = ray_directions(family.dim(), self.n_rays)?;
        let found = directions
            .par_iter()
            .map(|dir| {
                let exit = box_exit(&center, dir, &lower, &upper).min(r_max);
                let evidence = |r: f64| -> f64 {
                    let theta: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c + r * d).collect();
                    match fit.test(&theta) {
                        Ok(row) if !(row.statistic - row.threshold).is_nan() => row.statistic - row.threshold,
                        _ => 1.0,
                    }
                };
                let (mut lo, mut r) = (0.0, (r_max / 64.0).min(exit));
                if exit == 0.0 {
                    return Ok((0.0, true));
                }
                loop {
                    if evidence(r) > 0.0 {
                        return brent(evidence, lo, r, ROOT_TOL, 200).map(|root| (root, false));
                    }
                    if r >= exit {
                        return Ok((exit, true));
                    }
                    lo = r;
                    r = (2.0 * r).min(exit);
                }
            })
            .collect::<Result<Vec<(f64, bool)>>>()?;
        let (radii, clamped) = found.into_iter().unzip();
        Ok(ConfidenceSet {
            representation: Representation::StarConvex { center, directions, radii, clamped },
            provenance: fit.provenance(),
            rows: Vec::new(),
        })
    }
}

/// Number of interior points (at `fractions` of each ray's radius) that the
/// test rejects. Zero is consistent with star-convexity about the centre.
pub fn star_violations(fit: &RelativeFit, set: &ConfidenceSet, fractions: &[f64]) -> Result<usize> {
    let Representation::StarConvex { center, directions, radii, .. } = &set.representation else {
        return Ok(0);
    };
    let mut bad = 0;
    for (dir, r) in directions.iter().zip(radii) {
        for f in fractions {
            let theta: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c + f * r * d).collect();
            if !fit.test(&theta)?.accept {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

#[allow(clippy::too_many_arguments)]
pub fn invert_rays(
    family: &ParametricFamily,
    data: &[f64],
    split: &SplitSample,
    pilot: &PilotSpec,
    statistic: &StatisticSpec,
    rule: &ThresholdRule,
    n_rays: usize,
    r_max: Option<f64>,
) -> Result<ConfidenceSet> {
    let fit = RelativeFit::new(family, data, split, pilot, statistic, rule)?;
    RaySearch { n_rays, r_max }.run(&fit)
}
