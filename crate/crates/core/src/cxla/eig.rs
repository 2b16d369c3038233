//! Eigenvalues of general complex matrices: Householder reduction to upper
//! Hessenberg form followed by shifted QR iterations with Givens rotations.

use alloc::vec;
use alloc::vec::Vec;

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::fmath;

const MAX_ITER_PER_EIG: usize = 60;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Reduces `h` in place to upper Hessenberg form by unitary similarity.
pub(crate) fn hessenberg(h: &mut ComplexMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = fmath::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = fmath::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // H <- (I - 2vv*) H
        for j in 0..n {
            let mut dot = zero();
            for (idx, i) in (k + 1..n).enumerate() {
                dot += v[idx].conj() * h[(i, j)];
            }
            for (idx, i) in (k + 1..n).enumerate() {
                h[(i, j)] -= v[idx] * dot * 2.0;
            }
        }
        // H <- H (I - 2vv*)
        for i in 0..n {
            let mut dot = zero();
            for (idx, j) in (k + 1..n).enumerate() {
                dot += h[(i, j)] * v[idx];
            }
            for (idx, j) in (k + 1..n).enumerate() {
                h[(i, j)] -= dot * v[idx].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = zero();
        }
    }
}

/// Givens rotation `[c s; -conj(s) c]` that zeroes `b` against `a`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, zero());
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = fmath::hypot(an, bn);
    let alpha = a / an;
    (an / r, alpha * b.conj() / r)
}

/// Eigenvalue of the 2x2 block `[a b; c d]` closest to `d`.
fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m = (a + d) * 0.5;
    let l1 = m + disc;
    let l2 = m - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All eigenvalues of a square matrix, with multiplicity.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut eig = vec![zero(); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;

    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // Deflation search.
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l, l)].norm() + h[(l - 1, l - 1)].norm();
            if sub <= eps * diag || sub <= eps * scale * 1e-3 {
                h[(l, l - 1)] = zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > MAX_ITER_PER_EIG * n {
            return Err(Error::NoConvergence("eigenvalues"));
        }
        let mu = if iter % 11 == 10 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm() * 0.75, h[(hi, hi - 1)].norm() * 0.5)
        } else {
            wilkinson(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_step(&mut h, l, hi, mu);
    }
    Ok(eig)
}

/// One explicit shifted QR step on the active block `l..=hi`.
fn qr_step(h: &mut ComplexMatrix, l: usize, hi: usize, mu: C64) {
    for k in l..=hi {
        h[(k, k)] -= mu;
    }
    let mut rots: Vec<(f64, C64)> = Vec::with_capacity(hi - l);
    for k in l..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        h[(k + 1, k)] = zero();
        rots.push((c, s));
    }
    for (idx, k) in (l..hi).enumerate() {
        let (c, s) = rots[idx];
        let top = (k + 2).min(hi);
        for i in l..=top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for k in l..=hi {
        h[(k, k)] += mu;
    }
}

/// LU determinant with partial pivoting.
pub fn determinant(m: &ComplexMatrix) -> Result<C64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[(k, k)].norm();
        for i in k + 1..n {
            let v = a[(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Ok(zero());
        }
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for i in k + 1..n {
            let f = a[(i, k)] / p;
            if f == zero() {
                continue;
            }
            for j in k + 1..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    Ok(det)
}
