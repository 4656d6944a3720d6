//! Bracketing root finders.

use crate::error::{Error, Result};

/// Brent's method on a bracket with `f(a)` and `f(b)` of opposite sign
/// (or one of them zero). Terminates when the bracket is narrower than `tol`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "brent: no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(Error::Numerical(format!("brent: no convergence in {max_iter} iterations")))
}

/// Plain bisection for a fixed number of halvings. Requires a sign change.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, steps: usize) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::Numerical(format!("bisect: no sign change on [{a}, {b}]")));
    }
    let neg_left = fa < 0.0 || (fa == 0.0 && fb > 0.0);
    for _ in 0..steps {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fm < 0.0) == neg_left && fm != 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-12, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-11);
    }

    #[test]
    fn matches_bisection() {
        let f = |x: f64| (x - 0.3).tanh() + 0.1 * x;
        let r1 = brent(f, -1.0, 2.0, 1e-10, 200).unwrap();
        let r2 = bisect(f, -1.0, 2.0, 60).unwrap();
        assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-8, 50).is_err());
    }
}
