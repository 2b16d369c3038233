use alloc::vec::Vec;

use crate::cxla::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Affine matrix family `M(z) = M_0 + Σ_{i≥1} z_i M_i`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AffineMatrixFamily {
    coeffs: Vec<ComplexMatrix>,
}

impl AffineMatrixFamily {
    /// `coeffs[0]` is the constant term; all coefficients must share a shape.
    pub fn new(coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        let first = coeffs.first().ok_or(Error::EmptyMatrix)?;
        let shape = first.shape();
        if let Some(bad) = coeffs.iter().find(|c| c.shape() != shape) {
            return Err(crate::cxla::matrix_shape_err(
                "family coefficient",
                shape,
                bad.shape(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        Self { coeffs: alloc::vec![m] }
    }

    /// Number of varying parameters.
    pub fn q(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coeffs[0].shape()
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &ComplexMatrix {
        &self.coeffs[i]
    }

    /// `M_0 + Σ z_i M_i` for a tail of length `q`.
    pub fn evaluate(&self, ztail: &[C64]) -> Result<ComplexMatrix> {
        if ztail.len() != self.q() {
            return Err(Error::LengthMismatch {
                expected: self.q(),
                found: ztail.len(),
            });
        }
        let mut out = self.coeffs[0].clone();
        for (z, m) in ztail.iter().zip(&self.coeffs[1..]) {
            if *z != C64::new(0.0, 0.0) {
                out.axpy(*z, m)?;
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(ComplexMatrix::adjoint).collect(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(ComplexMatrix::is_real)
    }

    /// Spectral norm of each coefficient.
    pub fn coeff_norms(&self) -> Vec<f64> {
        self.coeffs.iter().map(crate::cxla::spectral_norm).collect()
    }
}
