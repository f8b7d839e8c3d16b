//! Safeguarded Newton iteration for strictly increasing functions.

use crate::error::{Error, Result};
use crate::scalar::lit;
use crate::Real;

const NEWTON_STEPS: usize = 50;
const BISECTION_STEPS: usize = 200;

/// Finds `x ∈ [lo, hi]` with `cdf(x) = target` for a strictly increasing
/// `cdf` with derivative `pdf`. Requires `cdf(lo) ≤ target ≤ cdf(hi)`.
/// Newton steps that leave the bracket are replaced by bisection; after
/// `NEWTON_STEPS` iterations the search continues by pure bisection.
pub fn solve_increasing<T, C, D>(
    cdf: C,
    pdf: D,
    target: T,
    mut lo: T,
    mut hi: T,
    guess: Option<T>,
) -> Result<T>
where
    T: Real,
    C: Fn(T) -> T,
    D: Fn(T) -> T,
{
    if !(lo < hi) || !target.is_finite() {
        return Err(Error::RootFinding(format!(
            "invalid bracket [{lo}, {hi}] for target {target}"
        )));
    }
    let f_tol = T::epsilon() * lit::<T>(4.0) * (T::one() + target.abs());
    let x_tol = T::epsilon() * lit::<T>(4.0) * (T::one() + lo.abs().max(hi.abs()));
    let half = lit::<T>(0.5);
    let mut x = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => half * (lo + hi),
    };
    for _ in 0..NEWTON_STEPS {
        let fx = cdf(x) - target;
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= x_tol {
            return Ok(half * (lo + hi));
        }
        let d = pdf(x);
        let step = x - fx / d;
        x = if d > T::zero() && step > lo && step < hi {
            step
        } else {
            half * (lo + hi)
        };
    }
    for _ in 0..BISECTION_STEPS {
        let fx = cdf(x) - target;
        if fx.abs() <= f_tol || hi - lo <= x_tol {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        x = half * (lo + hi);
    }
    Err(Error::RootFinding(format!(
        "no convergence for target {target} in bracket [{lo}, {hi}]"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_cubic() {
        let x = solve_increasing(|x: f64| x * x * x + x, |x| 3.0 * x * x + 1.0, 10.0, 0.0, 5.0, None)
            .unwrap();
        assert!((x * x * x + x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn survives_useless_derivative() {
        // derivative deliberately wrong: bisection safeguard still converges
        let x = solve_increasing(|x: f64| x.atan(), |_| 1e-30, 0.5, -10.0, 10.0, None).unwrap();
        assert!((x.atan() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_bracket() {
        assert!(solve_increasing(|x: f64| x, |_| 1.0, 0.0, 1.0, 1.0, None).is_err());
    }
}
