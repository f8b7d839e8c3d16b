//! Scalar abstraction for the density and kernel layers.
//!
//! Everything that evaluates densities, distribution functions or transition
//! kernels is generic over [`Real`], so the same code serves `f64` (the
//! default everywhere) and `f32`. Simulation, bridges and inference work on
//! `f64`.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Product
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Tolerance used as the "machine-level" stopping threshold of series
    /// and root finders for this scalar type.
    fn series_tolerance() -> Self;
}

impl Real for f64 {
    fn series_tolerance() -> Self {
        1e-17
    }
}

impl Real for f32 {
    fn series_tolerance() -> Self {
        1e-8
    }
}

/// Converts an `f64` literal into the scalar type.
#[inline(always)]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// `2π`
#[inline(always)]
pub fn two_pi<T: Real>() -> T {
    T::TAU()
}

/// Reduces an angle into `[0, 2π)`, returning the reduced angle and the
/// number of whole turns removed (`x = r + 2π·k`).
#[inline]
pub fn reduce_angle<T: Real>(x: T) -> (T, i64) {
    let tau = two_pi::<T>();
    let turns = (x / tau).floor();
    let mut r = x - turns * tau;
    let mut k = turns.to_i64().unwrap_or(0);
    // rounding can land exactly on 2π or slightly below 0
    if r >= tau {
        r -= tau;
        k += 1;
    }
    if r < T::zero() {
        r += tau;
        k -= 1;
        if r >= tau {
            r = T::zero();
        }
    }
    (r, k)
}

/// Angle reduced into `[0, 2π)`.
#[inline]
pub fn wrap_angle<T: Real>(x: T) -> T {
    reduce_angle(x).0
}

/// Reduces a value into `[0, 1)`, returning the fractional part and the floor.
#[inline]
pub fn reduce_unit<T: Real>(y: T) -> (T, i64) {
    let k = y.floor();
    let mut r = y - k;
    let mut ki = k.to_i64().unwrap_or(0);
    if r >= T::one() {
        r -= T::one();
        ki += 1;
    }
    (r, ki)
}

/// Signed difference reduced into `[-1/2, 1/2)`.
#[inline]
pub fn centered_unit<T: Real>(d: T) -> T {
    let half = lit::<T>(0.5);
    d - (d + half).floor()
}

/// Numerically stable `log(Σ exp(v))`.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_angle_round_trips() {
        for &x in &[-20.0, -std::f64::consts::TAU, -1e-18, 0.0, 3.0, std::f64::consts::TAU, 100.0] {
            let (r, k) = reduce_angle::<f64>(x);
            assert!((0.0..std::f64::consts::TAU).contains(&r), "{x} -> {r}");
            assert!((r + k as f64 * std::f64::consts::TAU - x).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_unit_range() {
        for &d in &[-1.7, -0.5, -0.49, 0.0, 0.5, 0.99, 3.25] {
            let c = centered_unit::<f64>(d);
            assert!((-0.5..0.5).contains(&c));
            assert!(((d - c) - (d - c).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let v = [0.1f64, -2.0, 1.5];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }
}
