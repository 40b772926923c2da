//! Root bracketing for convex functions that vanish at the origin.

use crate::error::{AslError, Result};

/// Locate the negative zero of a convex function `f` with `f(0) = 0` and
/// `f'(0) > 0`, i.e. `f < 0` on `(t0, 0)` and `f > 0` left of `t0`.
///
/// `guess` seeds the bracket; it is expanded geometrically by 2 until
/// `|t| > cap`, then refined by a bisection/regula-falsi hybrid until the
/// bracket is narrower than `tol * max(1, |t|)`.
pub(crate) fn negative_zero<F>(mut f: F, guess: f64, cap: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut t = if guess < 0.0 && guess.is_finite() { guess } else { -1.0 };

    // `hi` is the end nearest zero (f < 0); `lo` the far end (f > 0).
    let (mut lo, mut f_lo, mut hi, mut f_hi);
    let ft = f(t)?;
    if ft > 0.0 {
        lo = t;
        f_lo = ft;
        let mut h = t;
        let mut fh = ft;
        for _ in 0..1100 {
            h *= 0.5;
            fh = f(h)?;
            if fh <= 0.0 || h == 0.0 {
                break;
            }
            lo = h;
            f_lo = fh;
        }
        if fh > 0.0 || h == 0.0 {
            return Err(AslError::RootNotBracketed(
                "function is positive arbitrarily close to zero".into(),
            ));
        }
        if fh == 0.0 {
            return Ok(h);
        }
        hi = h;
        f_hi = fh;
    } else if ft < 0.0 {
        hi = t;
        f_hi = ft;
        loop {
            t *= 2.0;
            if t.abs() > cap {
                return Err(AslError::RootNotBracketed(format!(
                    "no sign change for |t| <= {cap:e}"
                )));
            }
            let v = f(t)?;
            if v > 0.0 {
                lo = t;
                f_lo = v;
                break;
            }
            if v == 0.0 {
                return Ok(t);
            }
            hi = t;
            f_hi = v;
        }
    } else {
        return Ok(t);
    }

    // Illinois variant of regula falsi with a bisection safeguard.
    let mut side = 0i8;
    for _ in 0..500 {
        let width = (hi - lo).abs();
        if width <= tol * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let mut m = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(m > lo && m < hi) || !m.is_finite() {
            m = 0.5 * (lo + hi);
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm > 0.0 {
            lo = m;
            f_lo = fm;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = m;
            f_hi = fm;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
        // Force a bisection step now and then to bound the iteration count.
        if (hi - lo).abs() > 0.5 * width {
            let mid = 0.5 * (lo + hi);
            let fmid = f(mid)?;
            if fmid == 0.0 {
                return Ok(mid);
            }
            if fmid > 0.0 {
                lo = mid;
                f_lo = fmid;
            } else {
                hi = mid;
                f_hi = fmid;
            }
            side = 0;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// Bisection for a monotone predicate on `[lo, hi]` where `pred(lo)` is false
/// and `pred(hi)` is true. Returns the boundary point within `tol`.
pub(crate) fn bisect_boundary<P>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    P: FnMut(f64) -> Result<bool>,
{
    for _ in 0..2000 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_root() {
        // 0.015 t + 0.005 t^2 vanishes at t = -3.
        let r = negative_zero(|t| Ok(0.015 * t + 0.005 * t * t), -0.5, 1e6, 1e-14).unwrap();
        assert!((r + 3.0).abs() < 1e-12, "{r}");
        let r = negative_zero(|t| Ok(0.015 * t + 0.005 * t * t), -100.0, 1e6, 1e-14).unwrap();
        assert!((r + 3.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn cap_reports_unbracketed() {
        let r = negative_zero(Ok, -1.0, 1e3, 1e-12);
        assert!(matches!(r, Err(AslError::RootNotBracketed(_))));
    }

    #[test]
    fn exponential_root() {
        // log(0.5 e^{-t} + 0.5 e^{2t}) vanishes at t = ln((sqrt(5) - 1) / 2).
        let f = |t: f64| Ok((0.5 * (-t).exp() + 0.5 * (2.0 * t).exp()).ln());
        let r = negative_zero(f, -1.0, 1e6, 1e-14).unwrap();
        assert!(f(r).unwrap().abs() < 1e-14);
        assert!((r - ((5f64.sqrt() - 1.0) / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn boundary_bisection() {
        let b = bisect_boundary(|t| Ok(t >= 0.3), 0.0, 1.0, 1e-12).unwrap();
        assert!((b - 0.3).abs() < 1e-12);
    }
}
