//! Adaptive Gauss–Kronrod quadrature and a fixed Gauss–Legendre panel rule.

use crate::error::{Error, Result};
use crate::scalar::lit;
use crate::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral<T> {
    pub value: T,
    pub error_estimate: T,
    pub subdivisions: usize,
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * lit::<T>(WGK[7]);
    let mut gauss = fc * lit::<T>(WG[3]);
    for j in 0..7 {
        let dx = radius * lit::<T>(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod += lit::<T>(WGK[j]) * s;
        if j % 2 == 1 {
            gauss += lit::<T>(WG[j / 2]) * s;
        }
    }
    (kronrod * radius, ((kronrod - gauss) * radius).abs())
}

/// Adaptive G7–K15 integration of `f` over `[a, b]`, stopping when the
/// summed error estimate falls below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Integral<T>> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            error_estimate: T::zero(),
            subdivisions: 0,
        });
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            break;
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                what: "adaptive Gauss-Kronrod".into(),
                error_estimate: err.to_f64().unwrap_or(f64::NAN),
                subdivisions: intervals.len(),
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, iv)| {
                if iv.3 > acc.1 {
                    (i, iv.3)
                } else {
                    acc
                }
            });
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = lit::<T>(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            // interval cannot be split further in this precision
            return Err(Error::Quadrature {
                what: "interval underflow".into(),
                error_estimate: err.to_f64().unwrap_or(f64::NAN),
                subdivisions: intervals.len(),
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total = total - v0 + v1 + v2;
        err = err - e0 + e1 + e2;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        if !total.is_finite() {
            return Err(Error::Quadrature {
                what: "non-finite integrand".into(),
                error_estimate: f64::NAN,
                subdivisions: intervals.len(),
            });
        }
    }
    // recompute the sum to shed accumulated cancellation from updates
    let value = intervals.iter().map(|iv| iv.2).sum();
    let error_estimate = intervals.iter().map(|iv| iv.3).sum();
    Ok(Integral {
        value,
        error_estimate,
        subdivisions: intervals.len(),
    })
}

const GL10_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Ten-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre_10<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T) -> T {
    let half = lit::<T>(0.5);
    let c = half * (a + b);
    let r = half * (b - a);
    let mut s = T::zero();
    for i in 0..5 {
        let dx = r * lit::<T>(GL10_X[i]);
        s += lit::<T>(GL10_W[i]) * (f(c - dx) + f(c + dx));
    }
    s * r
}
