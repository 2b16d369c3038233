#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use lpvcert_core::model::{ChannelStructure, LpvSystem, PerturbationStructure};
use lpvcert_core::{ComplexMatrix, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn m(rows: &[&[f64]]) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(rows)
}

pub fn rand_m(rng: &mut ChaCha8Rng, rows: usize, cols: usize, complex: bool) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| {
            let im = if complex { rng.gen_range(-2.0..=2.0) } else { 0.0 };
            c(rng.gen_range(-2.0..=2.0), im)
        })
        .collect();
    ComplexMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn to_na(a: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

/// Singular values from nalgebra, descending.
pub fn na_singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `[B, AB, ..., A^{n-1}B]`.
pub fn kalman_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> DMatrix<C64> {
    let (a, b) = (to_na(a), to_na(b));
    let n = a.nrows();
    let mut k = DMatrix::zeros(n, n * b.ncols());
    let mut blk = b.clone();
    for i in 0..n {
        k.columns_mut(i * b.ncols(), b.ncols()).copy_from(&blk);
        blk = &a * blk;
    }
    k
}

/// `(rank, σ_n / threshold)` of the Kalman matrix at relative tolerance
/// `tol`.
pub fn kalman_rank(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> (usize, f64) {
    let k = kalman_matrix(a, b);
    let n = a.rows();
    let mut s: Vec<f64> = k.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let thr = tol * s[0].max(1.0);
    (s.iter().filter(|&&x| x > thr).count(), s[n - 1] / thr)
}

/// Random invertible change of basis applied to `(A, B, C)`.
pub fn similarity(
    rng: &mut ChaCha8Rng,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    cm: &ComplexMatrix,
    complex: bool,
) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let n = a.rows();
    loop {
        let t = to_na(&rand_m(rng, n, n, complex)) * C64::new(0.5, 0.0) + DMatrix::identity(n, n);
        let Some(ti) = t.clone().try_inverse() else { continue };
        if t.norm() * ti.norm() > 1e3 {
            continue;
        }
        let back = |x: DMatrix<C64>| {
            ComplexMatrix::from_vec(x.nrows(), x.ncols(), x.transpose().iter().copied().collect()).unwrap()
        };
        return (
            back(&t * to_na(a) * &ti),
            back(&t * to_na(b)),
            back(to_na(cm) * &ti),
        );
    }
}

/// Zeroes the coupling from the first `k` states into the rest and the input
/// rows of the rest, which leaves `n - k` uncontrollable modes.
pub fn make_uncontrollable(a: &mut ComplexMatrix, b: &mut ComplexMatrix, k: usize) {
    let n = a.rows();
    for i in k..n {
        for j in 0..k {
            a[(i, j)] = c(0.0, 0.0);
        }
        for j in 0..b.cols() {
            b[(i, j)] = c(0.0, 0.0);
        }
    }
}

pub fn full_structure(sys: &mut LpvSystem) {
    let q = sys.q();
    sys.pert = PerturbationStructure::new(
        ChannelStructure::unstructured(q[0], sys.n, sys.n),
        ChannelStructure::unstructured(q[1], sys.n, sys.m),
        ChannelStructure::unstructured(q[2], sys.p, sys.n),
        ChannelStructure::unstructured(q[3], sys.p, sys.m),
    );
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary from the crate directory so report paths are relative.
pub fn lpvcert(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_lpvcert"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// `(name, arguments, expected exit code)`; reports are compared against
/// `tests/data/golden/<name>.json`.
pub const SCENARIOS: &[(&str, &[&str], i32)] = &[
    (
        "certified",
        &["analyze", "tests/data/double_integrator.json", "--property", "controllability"],
        0,
    ),
    ("violated", &["analyze", "tests/data/uncontrollable.json"], 1),
    (
        "inconclusive",
        &["delay-analyze", "tests/data/state_delay.json", "--budget", "50"],
        2,
    ),
    ("invalid", &["analyze", "tests/data/missing_famB.json"], 3),
];
