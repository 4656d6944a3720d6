//! Quantiles of the Bentkus second-order tail bound.
//!
//! `P2(u) = inf_{t <= u} E(SG - t)_+^2 / (u - t)_+^2` for a sum `SG` of `n`
//! i.i.d. two-point variables `G` with `P(G = B) = S^2 / (S^2 + B^2)` and
//! `G = -S^2 / B` otherwise. Then `SG = (B + S^2/B) K - n S^2 / B` with
//! `K ~ Binomial(n, p)`.
//!
//! On each interval between consecutive atoms of `SG` the active terms of the
//! expectation are fixed, so the objective is a ratio of quadratics in `t`
//! whose only stationary point is `t* = (A1 u - A2) / (A0 u - A1)`, where
//! `A0, A1, A2` are the suffix sums of `pi_k`, `pi_k v_k`, `pi_k v_k^2`. The
//! infimum is therefore taken exactly over stationary points and piece ends.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

const U_TOL: f64 = 1e-10;
const CACHE_CAP: usize = 1 << 16;

struct Atoms {
    values: Vec<f64>,
    a0: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

fn atoms(n: usize, b: f64, s: f64) -> Atoms {
    let s2 = s * s;
    let p = s2 / (s2 + b * b);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let lnf = |k: usize| libm::lgamma(k as f64 + 1.0);
    let high = b + s2 / b;
    let low = n as f64 * s2 / b;
    let values: Vec<f64> = (0..=n).map(|k| high * k as f64 - low).collect();
    let probs: Vec<f64> = (0..=n)
        .map(|k| {
            let lc = lnf(n) - lnf(k) - lnf(n - k);
            let lk = if k == 0 { 0.0 } else { k as f64 * lp };
            let lr = if k == n { 0.0 } else { (n - k) as f64 * lq };
            (lc + lk + lr).exp()
        })
        .collect();
    let mut a0 = vec![0.0; n + 2];
    let mut a1 = vec![0.0; n + 2];
    let mut a2 = vec![0.0; n + 2];
    for k in (0..=n).rev() {
        a0[k] = a0[k + 1] + probs[k];
        a1[k] = a1[k + 1] + probs[k] * values[k];
        a2[k] = a2[k + 1] + probs[k] * values[k] * values[k];
    }
    Atoms { values, a0, a1, a2 }
}

impl Atoms {
    /// `P2(u)`.
    fn tail(&self, u: f64) -> f64 {
        let n = self.values.len() - 1;
        if u > self.values[n] {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        // Piece j covers [v_{j-1}, v_j] (v_{-1} = -inf) with atoms k >= j active.
        for j in 0..=n {
            let lo = if j == 0 { f64::NEG_INFINITY } else { self.values[j - 1] };
            if lo >= u {
                break;
            }
            let hi = self.values[j].min(u);
            let (c0, c1, c2) = (self.a0[j], self.a1[j], self.a2[j]);
            let ratio = |t: f64| {
                let num = (c0 * t * t - 2.0 * c1 * t + c2).max(0.0);
                num / (u - t).powi(2)
            };
            let mut consider = |t: f64| {
                if t < u && t >= lo && t <= hi {
                    best = best.min(ratio(t));
                }
            };
            let den = c0 * u - c1;
            if den != 0.0 {
                consider((c1 * u - c2) / den);
            }
            if lo.is_finite() {
                consider(lo);
            }
            if hi < u {
                consider(hi);
            }
        }
        best.min(1.0)
    }
}

/// `P2(u)` for `n` summands; exposed for diagnostics and tests.
pub fn bentkus_tail(n: usize, b: f64, s: f64, u: f64) -> f64 {
    atoms(n, b, s).tail(u)
}

type QuantileCache = Mutex<HashMap<(usize, u64, u64, u64), f64>>;

fn cache() -> &'static QuantileCache {
    static CACHE: OnceLock<QuantileCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Smallest `u` with `P2(u) <= alpha`, for the sum of `n0` terms. Divide by
/// `n0` for a threshold on the mean.
pub fn bentkus_quantile(n0: usize, alpha: f64, b: f64, s: f64) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(b > 0.0) || !(s >= 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("bentkus needs B > 0, S >= 0, alpha > 0 (B={b}, S={s}, alpha={alpha})")));
    }
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        // Degenerate G == 0 almost surely: the sum never exceeds 0.
        return Ok(0.0);
    }
    let key = (n0, alpha.to_bits(), b.to_bits(), s.to_bits());
    if let Some(q) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*q);
    }
    let at = atoms(n0, b, s);
    let top = n0 as f64 * b;
    let q = if at.tail(top) > alpha {
        top
    } else {
        let (mut lo, mut hi) = (0.0, top);
        let mut iters = 0;
        while hi - lo > U_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if at.tail(mid) <= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
            iters += 1;
            if iters > 400 {
                return Err(Error::Numerical(format!(
                    "bentkus quantile did not converge: n0={n0} alpha={alpha} B={b} S={s} bracket=[{lo}, {hi}]"
                )));
            }
        }
        hi
    };
    let mut c = cache().lock().expect("cache poisoned");
    if c.len() >= CACHE_CAP {
        c.clear();
    }
    c.insert(key, q);
    Ok(q)
}
