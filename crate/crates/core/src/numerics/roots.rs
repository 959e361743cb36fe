use crate::error::{invalid, Error, Result};

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("invalid bracket [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }
}

/// Brent's method: inverse quadratic interpolation and secant steps guarded by
/// bisection, so the bracket always shrinks and convergence is guaranteed.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: RootBracket, tol: f64) -> Result<f64> {
    let RootBracket { lo, hi } = RootBracket::new(bracket.lo, bracket.hi)?;
    if !(tol > 0.0) {
        return Err(invalid("root tolerance must be positive"));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(invalid("target function is not finite at the bracket ends"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
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
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(invalid(format!("target function is not finite at {b}")));
        }
    }
    Err(Error::NoConvergence {
        what: "root finder",
        iterations: MAX_ITER,
        error: (c - b).abs(),
    })
}

/// Grow the upper end of `bracket` geometrically (and shrink the lower end)
/// until `f` changes sign, giving up after `max_steps` expansions.
pub fn widen_until_sign_change<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: RootBracket,
    factor: f64,
    max_steps: usize,
) -> Result<RootBracket> {
    let RootBracket { mut lo, mut hi } = bracket;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..=max_steps {
        if f_lo.signum() != f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
            return RootBracket::new(lo, hi);
        }
        if f_lo > 0.0 {
            lo /= factor;
            f_lo = f(lo);
        } else {
            hi *= factor;
            f_hi = f(hi);
        }
    }
    Err(Error::NoSignChange { lo, hi, f_lo, f_hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_sqrt_two() {
        let r = find_root(|x| x - 2.0, RootBracket::new(0.0, 5.0).unwrap(), 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let r = find_root(|x| x * x - 2.0, RootBracket::new(1.0, 2.0).unwrap(), 1e-12).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-11);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let err = find_root(|x| x * x + 1.0, RootBracket::new(-1.0, 1.0).unwrap(), 1e-9).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn bad_bracket_rejected() {
        assert!(RootBracket::new(2.0, 1.0).is_err());
        assert!(RootBracket::new(f64::NEG_INFINITY, 1.0).is_err());
    }

    #[test]
    fn steep_monotone_function() {
        // nearly a step: bisection fallback must still converge
        let f = |x: f64| (50.0 * (x - 0.3)).tanh();
        let r = find_root(f, RootBracket::new(0.0, 1.0).unwrap(), 1e-10).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn widening_finds_distant_root() {
        let b = widen_until_sign_change(|x| x - 300.0, RootBracket::new(1e-3, 50.0).unwrap(), 2.0, 20)
            .unwrap();
        assert!(b.lo <= 300.0 && b.hi >= 300.0);
        assert!(widen_until_sign_change(|_| 1.0, RootBracket::new(1.0, 2.0).unwrap(), 2.0, 5).is_err());
    }
}
