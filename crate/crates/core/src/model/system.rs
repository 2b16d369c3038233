use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    AffineMatrixFamily, Channel, ChannelStructure, DeltaAssignment, Diagnostic, ParameterPoint,
    PerturbationStructure, Severity,
};
use crate::cxla::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Affine parameter-varying system `(A(z), B(z), C(z), D(z))` with a
/// structured perturbation class.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LpvSystem {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub a: AffineMatrixFamily,
    pub b: AffineMatrixFamily,
    pub c: AffineMatrixFamily,
    pub d: AffineMatrixFamily,
    pub pert: PerturbationStructure,
}

impl LpvSystem {
    /// Builds and validates a system; dimensions come from `A`, `B` and `C`.
    pub fn new(
        a: AffineMatrixFamily,
        b: AffineMatrixFamily,
        c: AffineMatrixFamily,
        d: AffineMatrixFamily,
        pert: PerturbationStructure,
    ) -> Result<Self> {
        let sys = Self {
            n: a.shape().0,
            m: b.shape().1,
            p: c.shape().0,
            a,
            b,
            c,
            d,
            pert,
        };
        let errors: Vec<String> = sys
            .validate()
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message)
            .collect();
        if errors.is_empty() {
            Ok(sys)
        } else {
            Err(Error::InvalidSystem(errors.join("; ")))
        }
    }

    /// Parameter-free system without perturbations.
    pub fn constant(
        a: ComplexMatrix,
        b: ComplexMatrix,
        c: ComplexMatrix,
        d: ComplexMatrix,
    ) -> Result<Self> {
        let (n, m) = (a.rows(), b.cols());
        let pert = PerturbationStructure::new(
            ChannelStructure::empty(0, n),
            ChannelStructure::empty(0, m),
            ChannelStructure::empty(0, n),
            ChannelStructure::empty(0, m),
        );
        Self::new(
            AffineMatrixFamily::constant(a),
            AffineMatrixFamily::constant(b),
            AffineMatrixFamily::constant(c),
            AffineMatrixFamily::constant(d),
            pert,
        )
    }

    pub fn family(&self, ch: Channel) -> &AffineMatrixFamily {
        match ch {
            Channel::A => &self.a,
            Channel::B => &self.b,
            Channel::C => &self.c,
            Channel::D => &self.d,
        }
    }

    fn family_mut(&mut self, ch: Channel) -> &mut AffineMatrixFamily {
        match ch {
            Channel::A => &mut self.a,
            Channel::B => &mut self.b,
            Channel::C => &mut self.c,
            Channel::D => &mut self.d,
        }
    }

    /// Expected `(rows, cols)` of a channel.
    pub fn channel_shape(&self, ch: Channel) -> (usize, usize) {
        match ch {
            Channel::A => (self.n, self.n),
            Channel::B => (self.n, self.m),
            Channel::C => (self.p, self.n),
            Channel::D => (self.p, self.m),
        }
    }

    /// `[q_A, q_B, q_C, q_D]`.
    pub fn q(&self) -> [usize; 4] {
        Channel::ALL.map(|ch| self.family(ch).q())
    }

    pub fn origin(&self) -> ParameterPoint {
        ParameterPoint::zeros(self.q())
    }

    pub fn zero_delta(&self) -> DeltaAssignment {
        DeltaAssignment::zeros(&self.pert)
    }

    pub fn is_real(&self) -> bool {
        Channel::ALL.iter().all(|&ch| {
            self.family(ch).is_real()
                && self
                    .pert
                    .get(ch)
                    .iter()
                    .all(|(_, _, d)| d.is_real())
                && self.pert.get(ch).e.is_real()
        })
    }

    pub fn check_point(&self, point: &ParameterPoint) -> Result<()> {
        for (found, expected) in point.lengths().into_iter().zip(self.q()) {
            if found != expected {
                return Err(Error::LengthMismatch { expected, found });
            }
        }
        Ok(())
    }

    /// Nominal `X(z)`.
    pub fn nominal(&self, ch: Channel, point: &ParameterPoint) -> Result<ComplexMatrix> {
        self.family(ch).evaluate(point.tail(ch))
    }

    /// `X̃(z) = Σ_i z_i Σ_j D_ij Δ_ij E` with `z_0 = 1`.
    pub fn perturbation(
        &self,
        ch: Channel,
        point: &ParameterPoint,
        delta: &DeltaAssignment,
    ) -> Result<ComplexMatrix> {
        let cs = self.pert.get(ch);
        let (rows, cols) = self.channel_shape(ch);
        let z = point.full(ch);
        if z.len() != cs.blocks.len() {
            return Err(Error::LengthMismatch {
                expected: cs.blocks.len(),
                found: z.len(),
            });
        }
        let dv = delta.get(ch);
        if dv.len() != cs.blocks.len() {
            return Err(Error::ShapeMismatch(format!(
                "channel {ch:?}: delta covers {} indices, structure has {}",
                dv.len(),
                cs.blocks.len()
            )));
        }
        let mut acc = ComplexMatrix::zeros(rows, cols);
        for (i, zi) in z.iter().enumerate() {
            if *zi == C64::new(0.0, 0.0) || cs.blocks[i].is_empty() {
                continue;
            }
            let term = cs.term(i, &dv[i], rows)?;
            acc.axpy(*zi, &term)?;
        }
        Ok(acc)
    }

    /// `X(z) + X̃(z)`.
    pub fn total(
        &self,
        ch: Channel,
        point: &ParameterPoint,
        delta: &DeltaAssignment,
    ) -> Result<ComplexMatrix> {
        let mut m = self.nominal(ch, point)?;
        m.axpy(C64::new(1.0, 0.0), &self.perturbation(ch, point, delta)?)?;
        Ok(m)
    }

    /// Block-diagonal `Δ^(AB)` with
    /// `(−z^(A) ⊗ I_n : z^(B) ⊗ I_n) Δ^(AB) = (−Ã(z) : B̃(z))`.
    ///
    /// The upper-left block stacks `Ã_0, …, Ã_{q_A}` and the lower-right block
    /// stacks `B̃_0, …, B̃_{q_B}`, where `X̃_i = Σ_j D_ij Δ_ij E`.
    pub fn stacked_delta(&self, delta: &DeltaAssignment) -> Result<ComplexMatrix> {
        stacked_pair(self, delta, Channel::A, Channel::B)
    }

    /// Structural and dimensional diagnostics; never fails.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut err = |msg: String| out.push(Diagnostic::error(msg));
        if self.n == 0 || self.m == 0 || self.p == 0 {
            err(format!(
                "dimensions must be positive (n={}, m={}, p={})",
                self.n, self.m, self.p
            ));
        }
        for ch in Channel::ALL {
            let fam = self.family(ch);
            let want = self.channel_shape(ch);
            for (i, c) in fam.coeffs().iter().enumerate() {
                if c.shape() != want {
                    err(format!(
                        "{ch:?}_{i} is {}x{}, expected {}x{}",
                        c.rows(),
                        c.cols(),
                        want.0,
                        want.1
                    ));
                }
                if !c.is_finite() {
                    err(format!("{ch:?}_{i} has non-finite entries"));
                }
            }
            let cs = self.pert.get(ch);
            if cs.blocks.len() != fam.q() + 1 {
                err(format!(
                    "perturbation of {ch:?} lists {} parameter indices, family has {}",
                    cs.blocks.len(),
                    fam.q() + 1
                ));
            }
            if cs.e.cols() != want.1 {
                err(format!(
                    "E of {ch:?} has {} columns, expected {}",
                    cs.e.cols(),
                    want.1
                ));
            }
            for (i, j, d) in cs.iter() {
                if d.rows() != want.0 {
                    err(format!(
                        "D_{i}{} of {ch:?} has {} rows, expected {}",
                        j + 1,
                        d.rows(),
                        want.0
                    ));
                }
                if !d.is_finite() {
                    err(format!("D_{i}{} of {ch:?} has non-finite entries", j + 1));
                }
            }
            if !cs.e.is_finite() {
                err(format!("E of {ch:?} has non-finite entries"));
            }
        }
        if !(self.p <= self.m && self.m <= self.n) {
            out.push(Diagnostic::warning(format!(
                "dimension ordering p <= m <= n does not hold (n={}, m={}, p={}); results remain valid",
                self.n, self.m, self.p
            )));
        }
        out
    }

    /// Re-expresses the system around `z0`: nominal families become constant
    /// at their `z0` values and the affine variation `X(z) − X(z0)` moves into
    /// the perturbation class as extra blocks with `D = X_k`, `E = I`.
    ///
    /// The returned [`Recentering`] maps uncertainty values of `self` to the
    /// recentered structure.
    pub fn recenter(&self, z0: &ParameterPoint) -> Result<(LpvSystem, Recentering)> {
        self.check_point(z0)?;
        let mut out = self.clone();
        let mut ells = [0usize; 4];
        for ch in Channel::ALL {
            let fam = self.family(ch);
            let q = fam.q();
            let (rows, cols) = self.channel_shape(ch);
            let mut coeffs = vec![ComplexMatrix::zeros(rows, cols); q + 1];
            coeffs[0] = fam.evaluate(z0.tail(ch))?;
            *out.family_mut(ch) = AffineMatrixFamily::new(coeffs)?;

            let cs = self.pert.get(ch);
            ells[ch.index()] = cs.ell();
            let new_cs = out.pert.get_mut(ch);
            new_cs.e = cs.e.vstack(&ComplexMatrix::identity(cols))?;
            for k in 1..=q {
                new_cs.blocks[0].push(fam.coeff(k).clone());
            }
            for k in 1..=q {
                new_cs.blocks[k].push(fam.coeff(k).clone());
            }
        }
        Ok((
            out,
            Recentering {
                z0: z0.clone(),
                ells,
                cols: Channel::ALL.map(|ch| self.channel_shape(ch).1),
            },
        ))
    }

    /// Dual system `(A*, C*, B*, D*)` with the perturbation class transposed
    /// so that every dual perturbation is the adjoint of an original one.
    ///
    /// For a channel with blocks `D_ij` and shared `E`, the dual channel has
    /// `D'_ij = E*` and `E' = [D_00*; D_01*; …]`; see [`Self::dual_delta`].
    pub fn dual(&self) -> LpvSystem {
        LpvSystem {
            n: self.n,
            m: self.p,
            p: self.m,
            a: self.a.adjoint(),
            b: self.c.adjoint(),
            c: self.b.adjoint(),
            d: self.d.adjoint(),
            pert: PerturbationStructure::new(
                dual_channel(self.pert.get(Channel::A), self.n),
                dual_channel(self.pert.get(Channel::C), self.p),
                dual_channel(self.pert.get(Channel::B), self.n),
                dual_channel(self.pert.get(Channel::D), self.p),
            ),
        }
    }

    /// Uncertainty values for [`Self::dual`] matching `delta`:
    /// `Δ'_ij = Δ_ij* S_ij` with `S_ij` selecting block `(i, j)` of `E'`.
    pub fn dual_delta(&self, delta: &DeltaAssignment) -> Result<DeltaAssignment> {
        delta.check(&self.pert)?;
        let f = |ch: Channel| -> Vec<Vec<ComplexMatrix>> {
            let cs = self.pert.get(ch);
            let total: usize = cs.iter().map(|(_, _, d)| d.cols()).sum();
            let mut offset = 0;
            cs.blocks
                .iter()
                .zip(delta.get(ch))
                .map(|(brow, drow)| {
                    brow.iter()
                        .zip(drow)
                        .map(|(d, dl)| {
                            let adj = dl.adjoint();
                            let mut out = ComplexMatrix::zeros(cs.ell(), total);
                            out.set_block(0, offset, &adj).expect("block fits");
                            offset += d.cols();
                            out
                        })
                        .collect()
                })
                .collect()
        };
        Ok(DeltaAssignment {
            deltas: [f(Channel::A), f(Channel::C), f(Channel::B), f(Channel::D)],
        })
    }
}

/// Stacked block-diagonal uncertainty for a pair of channels sharing the
/// row dimension (A with B, or the dual pair).
pub(crate) fn stacked_pair(
    sys: &LpvSystem,
    delta: &DeltaAssignment,
    left: Channel,
    right: Channel,
) -> Result<ComplexMatrix> {
    delta.check(&sys.pert)?;
    let (rows, lcols) = sys.channel_shape(left);
    let rcols = sys.channel_shape(right).1;
    let ql = sys.family(left).q() + 1;
    let qr = sys.family(right).q() + 1;
    let mut out = ComplexMatrix::zeros((ql + qr) * rows, lcols + rcols);
    for (blk, ch, col0, row0) in [(ql, left, 0, 0), (qr, right, lcols, ql * rows)] {
        let cs = sys.pert.get(ch);
        for i in 0..blk {
            if cs.blocks[i].is_empty() {
                continue;
            }
            let t = cs.term(i, &delta.get(ch)[i], rows)?;
            out.set_block(row0 + i * rows, col0, &t)?;
        }
    }
    Ok(out)
}

fn dual_channel(cs: &ChannelStructure, rows: usize) -> ChannelStructure {
    let mut e = ComplexMatrix::zeros(0, rows);
    for (_, _, d) in cs.iter() {
        e = e.vstack(&d.adjoint()).expect("D blocks share the row count");
    }
    let e_adj = cs.e.adjoint();
    ChannelStructure {
        blocks: cs
            .blocks
            .iter()
            .map(|row| row.iter().map(|_| e_adj.clone()).collect())
            .collect(),
        e,
    }
}

/// Maps uncertainty values of a system onto its recentered form.
#[derive(Clone, Debug, PartialEq)]
pub struct Recentering {
    pub z0: ParameterPoint,
    ells: [usize; 4],
    cols: [usize; 4],
}

impl Recentering {
    /// Pads the original blocks with zero columns for the appended identity
    /// in `E` and fills the extra blocks so that the affine variation is
    /// reproduced exactly.
    pub fn lift_delta(&self, delta: &DeltaAssignment) -> Result<DeltaAssignment> {
        let mut out = delta.clone();
        for ch in Channel::ALL {
            let k = ch.index();
            let (ell, cols) = (self.ells[k], self.cols[k]);
            let dv = &mut out.deltas[k];
            for m in dv.iter_mut().flatten() {
                if m.cols() != ell {
                    return Err(Error::ShapeMismatch(format!(
                        "channel {ch:?}: delta has {} columns, expected {ell}",
                        m.cols()
                    )));
                }
                let mut padded = ComplexMatrix::zeros(m.rows(), ell + cols);
                padded.set_block(0, 0, m)?;
                *m = padded;
            }
            let q = dv.len().saturating_sub(1);
            let tail = self.z0.tail(ch);
            let extra = |c: C64| {
                let mut b = ComplexMatrix::zeros(cols, ell + cols);
                b.set_block(0, ell, &ComplexMatrix::identity(cols).scale(c))
                    .expect("identity fits");
                b
            };
            for zk in tail.iter().take(q) {
                dv[0].push(extra(-*zk));
            }
            for row in dv.iter_mut().skip(1) {
                row.push(extra(C64::new(1.0, 0.0)));
            }
        }
        Ok(out)
    }
}
