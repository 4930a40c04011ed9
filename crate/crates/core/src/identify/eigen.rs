//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! For a symmetric positive-semidefinite matrix the eigendecomposition is
//! also its singular value decomposition, which is all the identification
//! step needs. Jacobi keeps eigenvectors orthonormal to working precision
//! and resolves small eigenvalues with good relative accuracy.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 60;

/// Eigenpairs of a symmetric matrix, eigenvalues in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Array2<T>,
}

pub fn symmetric_eigen<T: Real>(matrix: &Array2<T>) -> Result<SymmetricEigen<T>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Invalid("eigen decomposition needs a square matrix".into()));
    }
    let mut a = matrix.clone();
    let mut v = Array2::<T>::eye(n);
    let two = T::of(2.0);

    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        let diag: T = (0..n).map(|p| a[[p, p]] * a[[p, p]]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            return Ok(sorted(a, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                a[[p, q]] = T::zero();
                a[[q, p]] = T::zero();
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Internal(format!(
        "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn sorted<T: Real>(a: Array2<T>, v: Array2<T>) -> SymmetricEigen<T> {
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&k| a[[k, k]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    SymmetricEigen { values, vectors }
}
