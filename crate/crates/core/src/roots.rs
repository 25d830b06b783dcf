//! Bracketed scalar root finding shared by the device solver and the
//! equilibrium search.

use crate::error::{Error, Result};

/// Locate a root of `f` on `[lo, hi]` by bisection until the bracket is
/// narrower than `tol`, then polish inside the final bracket with
/// Illinois-modified regula falsi steps.
///
/// The returned root is always inside the last bracket, so the `tol`
/// guarantee holds; the polish only sharpens it. `f` must change sign (or
/// vanish) at the ends.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, context: &str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let mut fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoBracket {
            lo: a,
            hi: b,
            context: context.to_owned(),
        });
    }

    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }

    // Illinois polish.
    let mut side = 0i8;
    for _ in 0..60 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            break;
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Scan `f` on a uniform grid of `n` intervals and return every bracket
/// `[x_k, x_{k+1}]` with a sign change. Exact zeros at grid points are
/// returned as degenerate brackets.
pub fn scan_brackets<F>(mut f: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut out = Vec::new();
    if n == 0 || !(hi > lo) {
        return out;
    }
    let step = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for k in 1..=n {
        let x1 = if k == n { hi } else { lo + step * k as f64 };
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push((x0, x0));
        } else if f0.is_finite() && f1.is_finite() && f1 != 0.0 && f0.signum() != f1.signum() {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push((x0, x0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-6, "sqrt").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_missing_sign_change() {
        let e = bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-6, "positive").unwrap_err();
        assert!(matches!(e, Error::NoBracket { .. }));
    }

    #[test]
    fn root_at_endpoint() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 1e-6, "").unwrap(), 0.0);
        assert_eq!(bisect(|x| x - 1.0, 0.0, 1.0, 1e-6, "").unwrap(), 1.0);
    }

    #[test]
    fn scan_counts_cubic_roots() {
        let b = scan_brackets(|x| (x - 0.1) * (x - 1.05) * (x + 2.3), -3.0, 3.0, 100);
        assert_eq!(b.len(), 3);
    }
}
