//! Small dense helpers for the `p × p` covariance matrices of the toroidal
//! layer. Matrices are row-major slices; `p` is tiny (1–3 in practice).

use crate::error::{Error, Result};
use crate::Real;

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
pub fn cholesky<T: Real>(a: &[T], p: usize) -> Result<Vec<T>> {
    if a.len() != p * p {
        return Err(Error::InvalidParameter(format!(
            "matrix has {} entries, expected {}",
            a.len(),
            p * p
        )));
    }
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::InvalidParameter(
                        "matrix is not positive definite".into(),
                    ));
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Ok(l)
}

/// `L z` for lower-triangular `L`.
pub fn lower_mul<T: Real>(l: &[T], z: &[T]) -> Vec<T> {
    let p = z.len();
    (0..p)
        .map(|i| (0..=i).map(|j| l[i * p + j] * z[j]).sum())
        .collect()
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn lower_solve<T: Real>(l: &[T], b: &[T]) -> Vec<T> {
    let p = b.len();
    let mut x = vec![T::zero(); p];
    for i in 0..p {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * p + j] * x[j];
        }
        x[i] = s / l[i * p + i];
    }
    x
}

/// `log det(A)` from its Cholesky factor.
pub fn log_det_from_cholesky<T: Real>(l: &[T], p: usize) -> T {
    (0..p).map(|i| l[i * p + i].ln()).sum::<T>() * lit2()
}

fn lit2<T: Real>() -> T {
    T::one() + T::one()
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse<T: Real>(l: &[T], p: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); p * p];
    for c in 0..p {
        let mut e = vec![T::zero(); p];
        e[c] = T::one();
        let y = lower_solve(l, &e);
        // back substitution with Lᵀ
        let mut x = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = y[i];
            for j in i + 1..p {
                s -= l[j * p + i] * x[j];
            }
            x[i] = s / l[i * p + i];
        }
        for r in 0..p {
            inv[r * p + c] = x[r];
        }
    }
    inv
}

pub fn is_symmetric<T: Real>(a: &[T], p: usize, tol: T) -> bool {
    (0..p).all(|i| {
        (0..i).all(|j| {
            let (x, y) = (a[i * p + j], a[j * p + i]);
            (x - y).abs() <= tol * (T::one() + x.abs().max(y.abs()))
        })
    })
}
