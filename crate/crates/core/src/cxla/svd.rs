//! One-sided (Hestenes) Jacobi SVD.
//!
//! Works directly on the columns of the matrix, so small singular values keep
//! full relative accuracy instead of being squared away through `M M*`.

use alloc::vec::Vec;

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::fmath;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `M = U diag(s) V*`.
///
/// `s` is sorted in decreasing order. For an `r x c` input, `U` is `r x k` and
/// `V` is `c x k` with `k = min(r, c)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Column-oriented Jacobi on a tall (`rows >= cols`) matrix.
///
/// Returns the orthogonalized columns (still scaled by their singular values)
/// and the accumulated right rotations.
fn jacobi_tall(m: &ComplexMatrix, want_v: bool) -> (ComplexMatrix, Option<ComplexMatrix>) {
    let rows = m.rows();
    let cols = m.cols();
    // Column-major working copy for cache-friendly column sweeps.
    let mut w: Vec<Vec<C64>> = (0..cols).map(|j| m.col(j)).collect();
    let mut v: Option<Vec<Vec<C64>>> = want_v.then(|| {
        (0..cols)
            .map(|j| {
                let mut e = alloc::vec![C64::new(0.0, 0.0); cols];
                e[j] = C64::new(1.0, 0.0);
                e
            })
            .collect()
    });
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..rows {
                    let a = w[p][i];
                    let b = w[q][i];
                    alpha += a.norm_sqr();
                    beta += b.norm_sqr();
                    gamma += a.conj() * b;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= eps * fmath::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + fmath::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + fmath::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = c * t;
                let pc = phase.conj();
                rotate(&mut w, p, q, c, s, phase, pc);
                if let Some(v) = v.as_mut() {
                    rotate(v, p, q, c, s, phase, pc);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut out = ComplexMatrix::zeros(rows, cols);
    for (j, col) in w.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            out[(i, j)] = z;
        }
    }
    let vout = v.map(|v| {
        let mut vm = ComplexMatrix::zeros(cols, cols);
        for (j, col) in v.iter().enumerate() {
            for (i, &z) in col.iter().enumerate() {
                vm[(i, j)] = z;
            }
        }
        vm
    });
    (out, vout)
}

#[inline]
fn rotate(w: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64, pc: C64) {
    // New p = c*w_p - s*conj(phase)*w_q ; new q = s*phase*w_p + c*w_q
    let (lo, hi) = w.split_at_mut(q);
    let wp = &mut lo[p];
    let wq = &mut hi[0];
    for (a, b) in wp.iter_mut().zip(wq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = x * c - pc * y * s;
        *b = phase * x * s + y * c;
    }
}

fn column_norms(w: &ComplexMatrix) -> Vec<f64> {
    (0..w.cols())
        .map(|j| fmath::sqrt((0..w.rows()).map(|i| w[(i, j)].norm_sqr()).sum()))
        .collect()
}

/// Singular values in decreasing order.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let work = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.adjoint()
    };
    let (w, _) = jacobi_tall(&work, false);
    let mut s = column_norms(&w);
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    Ok(s)
}

/// Thin SVD.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if m.rows() < m.cols() {
        let t = svd(&m.adjoint())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (w, v) = jacobi_tall(m, true);
    let v = v.expect("requested");
    let s = column_norms(&w);
    let k = m.cols();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut u = ComplexMatrix::zeros(m.rows(), k);
    let mut vs = ComplexMatrix::zeros(k, k);
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = s[src];
        ss.push(sigma);
        for i in 0..m.rows() {
            u[(i, dst)] = if sigma > 0.0 {
                w[(i, src)] / sigma
            } else {
                C64::new(0.0, 0.0)
            };
        }
        for i in 0..k {
            vs[(i, dst)] = v[(i, src)];
        }
    }
    Ok(Svd { u, s: ss, v: vs })
}
