//! Cyclic Jacobi eigendecomposition for small symmetric matrices.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue; ties keep ascending original
/// (diagonal) index. `vectors` holds unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

fn tolerance<T: Real>() -> T {
    T::cast(1e-10).max(T::epsilon() * T::cast(4.0))
}

pub fn symmetric_eigen<T: Real>(matrix: &Array2<T>) -> Result<SymmetricEigen<T>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Shape(format!("eigendecomposition of non-square {}x{}", n, matrix.ncols())));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("matrix has non-finite entries".into()));
    }
    let mut a = matrix.clone();
    // Symmetrize away rounding asymmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (a[[i, j]] + a[[j, i]]) * T::cast(0.5);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    let mut v = Array2::<T>::eye(n);
    let norm = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = tolerance::<T>() * norm.max(T::min_positive_value());

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (T::cast(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
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
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap().then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok(SymmetricEigen { values, vectors })
}
