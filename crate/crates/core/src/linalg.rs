//! Small dense symmetric-matrix routines (row-major `n x n` slices).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {i} is {s:e}"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `log det A` from its Cholesky factor.
pub fn log_det_from_cholesky<T: Scalar>(l: &[T], n: usize) -> T {
    (0..n).map(|i| l[i * n + i].ln()).sum::<T>() * T::lit(2.0)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &[T], n: usize) -> Vec<T> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: T = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= T::epsilon() * T::epsilon() * (diag + T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

/// Generalised eigenvalues of the pencil `(A, B)` with `B` positive definite.
pub fn generalized_eigenvalues<T: Scalar>(a: &[T], b: &[T], n: usize) -> Result<Vec<T>> {
    let l = cholesky(b, n)?;
    // M = L^-1 A L^-T
    let mut tmp = vec![T::zero(); n * n];
    for col in 0..n {
        let mut c: Vec<T> = (0..n).map(|r| a[r * n + col]).collect();
        forward_substitute(&l, n, &mut c);
        for r in 0..n {
            tmp[r * n + col] = c[r];
        }
    }
    let mut m = vec![T::zero(); n * n];
    for row in 0..n {
        let mut r: Vec<T> = tmp[row * n..(row + 1) * n].to_vec();
        forward_substitute(&l, n, &mut r);
        m[row * n..(row + 1) * n].copy_from_slice(&r);
    }
    // symmetrise away rounding
    for i in 0..n {
        for j in i + 1..n {
            let v = (m[i * n + j] + m[j * n + i]) * T::lit(0.5);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(symmetric_eigenvalues(&m, n))
}
