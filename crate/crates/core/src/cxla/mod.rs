//! Dense complex linear-algebra kernel.
//!
//! Everything the analysis layers need sits here: extreme singular values,
//! eigenvalues, determinants, numerical rank, Kronecker products, the
//! row-stacking `vec`, null spaces and minimum-norm least squares.

mod eig;
mod matrix;
mod svd;

use alloc::vec::Vec;

pub use eig::{determinant, eigenvalues};
pub use matrix::ComplexMatrix;
pub(crate) use matrix::shape_err as matrix_shape_err;
pub use svd::{singular_values, svd, Svd};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// `(σ_min, σ_max)` of a nonempty matrix.
pub fn svd_extremes(m: &ComplexMatrix) -> Result<(f64, f64)> {
    let s = singular_values(m)?;
    Ok((*s.last().expect("nonempty"), s[0]))
}

/// Spectral norm; zero for empty matrices.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).map(|s| s[0]).unwrap_or(0.0)
}

/// Rank threshold used everywhere: `tol_rel * max(1, σ_max)`.
pub fn rank_threshold(sigma_max: f64, tol_rel: f64) -> f64 {
    tol_rel * sigma_max.max(1.0)
}

/// Number of singular values above `tol_rel * max(1, σ_max)`.
pub fn numerical_rank(m: &ComplexMatrix, tol_rel: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let thr = rank_threshold(s[0], tol_rel);
    Ok(s.iter().filter(|&&x| x > thr).count())
}

/// Kronecker product `(a_ij * b)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Row-stacking vectorization: the rows of `a` laid end to end as a column.
///
/// With this convention `vec(A X B) = (A ⊗ Bᵀ) vec(X)`.
pub fn vec(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    Ok(ComplexMatrix::column(a.as_slice()))
}

/// Inverse of [`vec`].
pub fn unvec(v: &[C64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::from_vec(rows, cols, v.to_vec())
}

/// Orthonormal basis (as columns) of the right null space of `m`, using the
/// same relative threshold as [`numerical_rank`].
pub fn null_space(m: &ComplexMatrix, tol_rel: f64) -> Result<ComplexMatrix> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (r, c) = m.shape();
    // Pad wide inputs with zero rows so the thin SVD carries a full V.
    let padded = if r < c {
        m.vstack(&ComplexMatrix::zeros(c - r, c))?
    } else {
        m.clone()
    };
    let d = svd(&padded)?;
    let thr = rank_threshold(d.s[0], tol_rel);
    let idx: Vec<usize> = (0..d.s.len()).filter(|&k| d.s[k] <= thr).collect();
    let mut out = ComplexMatrix::zeros(c, idx.len());
    for (dst, &k) in idx.iter().enumerate() {
        for i in 0..c {
            out[(i, dst)] = d.v[(i, k)];
        }
    }
    Ok(out)
}

/// Right singular vector belonging to the smallest singular value.
pub fn smallest_right_singular_vector(m: &ComplexMatrix) -> Result<(f64, Vec<C64>)> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (r, c) = m.shape();
    let padded = if r < c {
        m.vstack(&ComplexMatrix::zeros(c - r, c))?
    } else {
        m.clone()
    };
    let d = svd(&padded)?;
    let k = d.s.len() - 1;
    Ok((d.s[k], d.v.col(k)))
}

/// Minimum-norm least-squares solution of `m x = b`, discarding singular
/// values at or below `rcond * σ_max`.
pub fn lstsq_min_norm(m: &ComplexMatrix, b: &[C64], rcond: f64) -> Result<Vec<C64>> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if b.len() != m.rows() {
        return Err(Error::LengthMismatch {
            expected: m.rows(),
            found: b.len(),
        });
    }
    let d = svd(m)?;
    let thr = rcond * d.s[0];
    let mut x = alloc::vec![C64::new(0.0, 0.0); m.cols()];
    for k in 0..d.s.len() {
        let sk = d.s[k];
        if sk <= thr || sk == 0.0 {
            continue;
        }
        let mut coef = C64::new(0.0, 0.0);
        for (i, &bi) in b.iter().enumerate() {
            coef += d.u[(i, k)].conj() * bi;
        }
        coef /= sk;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += d.v[(j, k)] * coef;
        }
    }
    Ok(x)
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    crate::fmath::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}
