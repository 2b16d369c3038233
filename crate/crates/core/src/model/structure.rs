use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Channel;
use crate::cxla::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Structured perturbation of one channel:
/// `X̃(z) = Σ_i z_i Σ_j D_ij Δ_ij E` with `z_0 = 1`.
///
/// `blocks[i]` holds the left factors `D_ij` for parameter index `i`
/// (`0..=q`); the right factor `E` is shared by every block of the channel.
/// A channel with no blocks is unperturbed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChannelStructure {
    pub blocks: Vec<Vec<ComplexMatrix>>,
    pub e: ComplexMatrix,
}

impl ChannelStructure {
    /// No perturbation on a channel with `q` parameters and `cols` columns.
    pub fn empty(q: usize, cols: usize) -> Self {
        Self {
            blocks: vec![Vec::new(); q + 1],
            e: ComplexMatrix::zeros(0, cols),
        }
    }

    /// One full `rows x cols` block per parameter index (`D = I`, `E = I`).
    pub fn unstructured(q: usize, rows: usize, cols: usize) -> Self {
        Self {
            blocks: vec![vec![ComplexMatrix::identity(rows)]; q + 1],
            e: ComplexMatrix::identity(cols),
        }
    }

    /// Shared row count `ℓ` of `E`.
    pub fn ell(&self) -> usize {
        self.e.rows()
    }

    pub fn q(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_trivial(&self) -> bool {
        self.block_count() == 0 || self.e.rows() == 0
    }

    /// Iterates `(i, j, D_ij)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &ComplexMatrix)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, d)| (i, j, d)))
    }

    /// `X̃_i = Σ_j D_ij Δ_ij E` for one index `i`.
    pub fn term(&self, i: usize, deltas: &[ComplexMatrix], rows: usize) -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::zeros(rows, self.e.cols());
        for (d, delta) in self.blocks[i].iter().zip(deltas) {
            if d.is_empty() || self.e.is_empty() {
                continue;
            }
            let t = d.try_mul(delta)?.try_mul(&self.e)?;
            acc.axpy(C64::new(1.0, 0.0), &t)?;
        }
        Ok(acc)
    }
}

/// Perturbation structures for the channels A, B, C and D.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PerturbationStructure {
    pub channels: [ChannelStructure; 4],
}

impl PerturbationStructure {
    pub fn new(a: ChannelStructure, b: ChannelStructure, c: ChannelStructure, d: ChannelStructure) -> Self {
        Self {
            channels: [a, b, c, d],
        }
    }

    pub fn get(&self, ch: Channel) -> &ChannelStructure {
        &self.channels[ch.index()]
    }

    pub fn get_mut(&mut self, ch: Channel) -> &mut ChannelStructure {
        &mut self.channels[ch.index()]
    }

    pub fn is_trivial(&self) -> bool {
        self.channels.iter().all(ChannelStructure::is_trivial)
    }
}

/// Concrete values of every uncertainty block, `deltas[ch][i][j]` of shape
/// `ℓ_ij x ℓ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DeltaAssignment {
    pub deltas: [Vec<Vec<ComplexMatrix>>; 4],
}

impl DeltaAssignment {
    /// All blocks zero.
    pub fn zeros(s: &PerturbationStructure) -> Self {
        let f = |cs: &ChannelStructure| {
            cs.blocks
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|d| ComplexMatrix::zeros(d.cols(), cs.ell()))
                        .collect()
                })
                .collect()
        };
        Self {
            deltas: [
                f(&s.channels[0]),
                f(&s.channels[1]),
                f(&s.channels[2]),
                f(&s.channels[3]),
            ],
        }
    }

    pub fn get(&self, ch: Channel) -> &[Vec<ComplexMatrix>] {
        &self.deltas[ch.index()]
    }

    pub fn block_mut(&mut self, ch: Channel, i: usize, j: usize) -> &mut ComplexMatrix {
        &mut self.deltas[ch.index()][i][j]
    }

    pub fn is_zero(&self) -> bool {
        self.deltas
            .iter()
            .flatten()
            .flatten()
            .all(|m| m.as_slice().iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        for m in out.deltas.iter_mut().flatten().flatten() {
            *m = m.scale(C64::new(k, 0.0));
        }
        out
    }

    /// Checks every block shape against `s`.
    pub fn check(&self, s: &PerturbationStructure) -> Result<()> {
        for ch in Channel::ALL {
            let cs = s.get(ch);
            let dv = self.get(ch);
            if dv.len() != cs.blocks.len() {
                return Err(Error::ShapeMismatch(format!(
                    "channel {ch:?}: {} delta rows for {} parameter indices",
                    dv.len(),
                    cs.blocks.len()
                )));
            }
            for (i, (drow, brow)) in dv.iter().zip(&cs.blocks).enumerate() {
                if drow.len() != brow.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "channel {ch:?} index {i}: {} deltas for {} blocks",
                        drow.len(),
                        brow.len()
                    )));
                }
                for (j, (delta, d)) in drow.iter().zip(brow).enumerate() {
                    if delta.shape() != (d.cols(), cs.ell()) {
                        return Err(Error::ShapeMismatch(format!(
                            "channel {ch:?} block ({i},{j}): delta is {}x{}, expected {}x{}",
                            delta.rows(),
                            delta.cols(),
                            d.cols(),
                            cs.ell()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
