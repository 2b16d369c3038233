//! Systems with point delays in the state and the input.
//!
//! ```text
//! ẋ(t) = (A + Ã) x(t) + Σ_j (A_j + Ã_j) x(t − h_j)
//!      + (B + B̃) u(t) + Σ_j (B_j + B̃_j) u(t − h'_j)
//! y(t) = (C + C̃) x(t) + (D + D̃) u(t)
//! ```
//!
//! Every delayed state family shares one parameter tuple `z^(Ad)`, every
//! delayed input family shares `z^(Bd)`. In the PBH matrices each delay
//! contributes a factor `e^{−h s}`. Lifting replaces that factor by a polar
//! pair `ρ e^{−iφ}` with `ρ = e^{−hσ}` and `φ = hω mod 2π`, which turns the
//! delay system into a parameter-varying one; [`consistency_check`] recovers
//! whether lifted coordinates come from a genuine `s`.

mod search;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use search::{
    delay_dependent_test, delay_independent_test, DelayMode, DelayOptions, DelayReport, DelayWitness, Screening,
};

use crate::cxla::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::fmath;
use crate::model::{
    AffineMatrixFamily, BoxDomain, Channel, ChannelStructure, ComplexInterval, DeltaAssignment, Diagnostic,
    LpvSystem, ParameterPoint, PerturbationStructure, Severity,
};
use crate::pbh::{assemble_from, PbhKind};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// One delayed family with its perturbation structure and the largest
/// admissible delay.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayedTerm {
    pub family: AffineMatrixFamily,
    pub structure: ChannelStructure,
    pub bound: f64,
}

impl DelayedTerm {
    pub fn new(family: AffineMatrixFamily, structure: ChannelStructure, bound: f64) -> Self {
        Self {
            family,
            structure,
            bound,
        }
    }

    /// Term without a perturbation.
    pub fn unperturbed(family: AffineMatrixFamily, bound: f64) -> Self {
        let structure = ChannelStructure::empty(family.q(), family.shape().1);
        Self::new(family, structure, bound)
    }

    fn zero_delta(&self) -> Vec<Vec<ComplexMatrix>> {
        let ell = self.structure.ell();
        self.structure
            .blocks
            .iter()
            .map(|row| row.iter().map(|d| ComplexMatrix::zeros(d.cols(), ell)).collect())
            .collect()
    }

    fn check_delta(&self, deltas: &[Vec<ComplexMatrix>], what: &str) -> Result<()> {
        let ell = self.structure.ell();
        let ok = deltas.len() == self.structure.blocks.len()
            && deltas.iter().zip(&self.structure.blocks).all(|(drow, brow)| {
                drow.len() == brow.len()
                    && drow
                        .iter()
                        .zip(brow)
                        .all(|(delta, d)| delta.shape() == (d.cols(), ell))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{what}: delta does not match its structure")))
        }
    }

    /// Coefficients of `X_j + X̃_j` as an affine family.
    fn effective(&self, deltas: &[Vec<ComplexMatrix>]) -> Result<Vec<ComplexMatrix>> {
        let rows = self.family.shape().0;
        let mut out = self.family.coeffs().to_vec();
        for (i, c) in out.iter_mut().enumerate() {
            if !self.structure.blocks[i].is_empty() {
                c.axpy(C64::new(1.0, 0.0), &self.structure.term(i, &deltas[i], rows)?)?;
            }
        }
        Ok(out)
    }
}

/// Delay system built on a delay-free [`LpvSystem`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelaySystem {
    pub base: LpvSystem,
    /// State delays, `n x n`, parameters `z^(Ad)`.
    pub internal: Vec<DelayedTerm>,
    /// Input delays, `n x m`, parameters `z^(Bd)`.
    pub external: Vec<DelayedTerm>,
}

impl DelaySystem {
    pub fn new(base: LpvSystem, internal: Vec<DelayedTerm>, external: Vec<DelayedTerm>) -> Result<Self> {
        if let Some(t) = internal.iter().chain(&external).find(|t| t.bound < 0.0) {
            return Err(Error::NegativeDelay(t.bound));
        }
        let sys = Self {
            base,
            internal,
            external,
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

    /// No delayed terms at all.
    pub fn undelayed(base: LpvSystem) -> Self {
        Self {
            base,
            internal: Vec::new(),
            external: Vec::new(),
        }
    }

    pub fn q_ad(&self) -> usize {
        self.internal.first().map_or(0, |t| t.family.q())
    }

    pub fn q_bd(&self) -> usize {
        self.external.first().map_or(0, |t| t.family.q())
    }

    pub fn internal_bounds(&self) -> Vec<f64> {
        self.internal.iter().map(|t| t.bound).collect()
    }

    pub fn external_bounds(&self) -> Vec<f64> {
        self.external.iter().map(|t| t.bound).collect()
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = self.base.validate();
        let (n, m) = (self.base.n, self.base.m);
        for (name, terms, shape, q) in [
            ("A", &self.internal, (n, n), self.q_ad()),
            ("B", &self.external, (n, m), self.q_bd()),
        ] {
            for (j, t) in terms.iter().enumerate() {
                let tag = format!("delayed {name}_{}", j + 1);
                let mut err = |msg: String| out.push(Diagnostic::error(format!("{tag}: {msg}")));
                if t.family.shape() != shape {
                    let (r, c) = t.family.shape();
                    err(format!("is {r}x{c}, expected {}x{}", shape.0, shape.1));
                }
                if t.family.coeffs().iter().any(|c| !c.is_finite()) {
                    err(String::from("has non-finite entries"));
                }
                if t.family.q() != q {
                    err(format!("has {} parameters, expected {q}", t.family.q()));
                }
                if !(t.bound >= 0.0 && t.bound.is_finite()) {
                    err(format!("delay bound {} is not a finite nonnegative number", t.bound));
                }
                let cs = &t.structure;
                if cs.blocks.len() != t.family.q() + 1 {
                    err(format!(
                        "perturbation lists {} parameter indices, family has {}",
                        cs.blocks.len(),
                        t.family.q() + 1
                    ));
                }
                if cs.e.cols() != shape.1 {
                    err(format!("E has {} columns, expected {}", cs.e.cols(), shape.1));
                }
                if cs.iter().any(|(_, _, d)| d.rows() != shape.0) {
                    err(format!("a D block does not have {} rows", shape.0));
                }
            }
        }
        out
    }

    pub fn zero_delta(&self) -> DelayDelta {
        DelayDelta {
            base: self.base.zero_delta(),
            internal: self.internal.iter().map(DelayedTerm::zero_delta).collect(),
            external: self.external.iter().map(DelayedTerm::zero_delta).collect(),
        }
    }

    pub fn check_point(&self, p: &DelayPoint) -> Result<()> {
        self.base.check_point(&p.base)?;
        for (found, expected) in [(p.ad.len(), self.q_ad()), (p.bd.len(), self.q_bd())] {
            if found != expected {
                return Err(Error::LengthMismatch { expected, found });
            }
        }
        Ok(())
    }

    /// Checks delay tuples against the admissible intervals. External delays
    /// are indexed after the internal ones in errors.
    pub fn check_delays(&self, h: &[f64], hp: &[f64]) -> Result<()> {
        for (vals, terms, offset) in [(h, &self.internal, 0), (hp, &self.external, self.internal.len())] {
            if vals.len() != terms.len() {
                return Err(Error::LengthMismatch {
                    expected: terms.len(),
                    found: vals.len(),
                });
            }
            for (j, (&v, t)) in vals.iter().zip(terms.iter()).enumerate() {
                if !(v >= 0.0) {
                    return Err(Error::NegativeDelay(v));
                }
                if v > t.bound {
                    return Err(Error::DelayOutOfRange {
                        index: offset + j,
                        value: v,
                        bound: t.bound,
                    });
                }
            }
        }
        Ok(())
    }

    /// Delay-free system obtained by setting every delay to zero: the delayed
    /// families are added to the base with their parameters appended to the
    /// A and B tails, and `delta` is folded into the nominal coefficients.
    pub fn collapse(&self, delta: &DelayDelta) -> Result<LpvSystem> {
        delta.check(self)?;
        let sys = &self.base;
        let mut fams = Vec::with_capacity(4);
        for ch in Channel::ALL {
            let rows = sys.channel_shape(ch).0;
            let cs = sys.pert.get(ch);
            let mut coeffs = sys.family(ch).coeffs().to_vec();
            for (i, c) in coeffs.iter_mut().enumerate() {
                if !cs.blocks[i].is_empty() {
                    c.axpy(C64::new(1.0, 0.0), &cs.term(i, &delta.base.get(ch)[i], rows)?)?;
                }
            }
            let (terms, deltas, q) = match ch {
                Channel::A => (&self.internal, &delta.internal, self.q_ad()),
                Channel::B => (&self.external, &delta.external, self.q_bd()),
                _ => {
                    fams.push(AffineMatrixFamily::new(coeffs)?);
                    continue;
                }
            };
            let shape = sys.channel_shape(ch);
            let mut extra = vec![ComplexMatrix::zeros(shape.0, shape.1); q];
            for (t, d) in terms.iter().zip(deltas) {
                let eff = t.effective(d)?;
                coeffs[0].axpy(C64::new(1.0, 0.0), &eff[0])?;
                for (x, c) in extra.iter_mut().zip(&eff[1..]) {
                    x.axpy(C64::new(1.0, 0.0), c)?;
                }
            }
            coeffs.extend(extra);
            fams.push(AffineMatrixFamily::new(coeffs)?);
        }
        let d = fams.pop().expect("four families");
        let c = fams.pop().expect("four families");
        let b = fams.pop().expect("four families");
        let a = fams.pop().expect("four families");
        let pert = PerturbationStructure::new(
            ChannelStructure::empty(a.q(), sys.n),
            ChannelStructure::empty(b.q(), sys.m),
            ChannelStructure::empty(c.q(), sys.n),
            ChannelStructure::empty(d.q(), sys.m),
        );
        LpvSystem::new(a, b, c, d, pert)
    }
}

/// Uncertainty values for a [`DelaySystem`]; `internal[j][i][k]` is block
/// `k` of parameter index `i` of the `j`-th state delay.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayDelta {
    pub base: DeltaAssignment,
    pub internal: Vec<Vec<Vec<ComplexMatrix>>>,
    pub external: Vec<Vec<Vec<ComplexMatrix>>>,
}

impl DelayDelta {
    /// Values for the base system only, delayed blocks zero.
    pub fn from_base(dsys: &DelaySystem, base: DeltaAssignment) -> Self {
        Self { base, ..dsys.zero_delta() }
    }

    pub fn check(&self, dsys: &DelaySystem) -> Result<()> {
        self.base.check(&dsys.base.pert)?;
        for (vals, terms, name) in [
            (&self.internal, &dsys.internal, "delayed A"),
            (&self.external, &dsys.external, "delayed B"),
        ] {
            if vals.len() != terms.len() {
                return Err(Error::LengthMismatch {
                    expected: terms.len(),
                    found: vals.len(),
                });
            }
            for (t, d) in terms.iter().zip(vals) {
                t.check_delta(d, name)?;
            }
        }
        Ok(())
    }
}

/// Parameter values of a delay system.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayPoint {
    pub base: ParameterPoint,
    pub ad: Vec<C64>,
    pub bd: Vec<C64>,
}

impl DelayPoint {
    pub fn new(base: ParameterPoint, ad: Vec<C64>, bd: Vec<C64>) -> Self {
        Self { base, ad, bd }
    }

    /// The matching point of [`DelaySystem::collapse`].
    pub fn collapse(&self) -> ParameterPoint {
        let mut p = self.base.clone();
        p.a.extend_from_slice(&self.ad);
        p.b.extend_from_slice(&self.bd);
        p
    }
}

/// Box of parameter values of a delay system.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayDomain {
    pub base: BoxDomain,
    pub ad: Vec<ComplexInterval>,
    pub bd: Vec<ComplexInterval>,
}

impl DelayDomain {
    pub fn new(base: BoxDomain, ad: Vec<ComplexInterval>, bd: Vec<ComplexInterval>) -> Self {
        Self { base, ad, bd }
    }

    pub fn singleton(p: &DelayPoint) -> Self {
        let f = |v: &[C64]| v.iter().map(|&z| ComplexInterval::point(z)).collect();
        Self::new(BoxDomain::singleton(&p.base), f(&p.ad), f(&p.bd))
    }

    pub fn is_bounded(&self) -> bool {
        self.merged().is_bounded()
    }

    pub fn center(&self) -> DelayPoint {
        self.split(&self.merged().center())
    }

    /// The domain of [`DelaySystem::collapse`].
    pub fn merged(&self) -> BoxDomain {
        let mut b = self.base.clone();
        b.a.extend_from_slice(&self.ad);
        b.b.extend_from_slice(&self.bd);
        b
    }

    /// Inverse of [`DelayPoint::collapse`] for points of [`Self::merged`].
    pub fn split(&self, p: &ParameterPoint) -> DelayPoint {
        let (qa, qb) = (self.base.a.len(), self.base.b.len());
        let mut base = p.clone();
        let ad = base.a.split_off(qa.min(base.a.len()));
        let bd = base.b.split_off(qb.min(base.b.len()));
        DelayPoint::new(base, ad, bd)
    }

    fn check(&self, dsys: &DelaySystem) -> Result<()> {
        let q = dsys.base.q();
        let found = self.base.lengths();
        for (f, e) in found.into_iter().zip(q).chain([(self.ad.len(), dsys.q_ad()), (self.bd.len(), dsys.q_bd())]) {
            if f != e {
                return Err(Error::LengthMismatch { expected: e, found: f });
            }
        }
        if !self.is_bounded() {
            return Err(Error::UnboundedDomain);
        }
        Ok(())
    }
}

/// Polar pair standing for the factor `ρ e^{−iφ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Polar {
    pub rho: f64,
    pub phi: f64,
}

impl Polar {
    /// Checks `ρ > 0` and reduces `φ` into `[0, 2π)`.
    pub fn new(rho: f64, phi: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) || !phi.is_finite() {
            return Err(Error::InvalidOption(format!("polar pair ({rho}, {phi}) needs rho > 0")));
        }
        Ok(Self {
            rho,
            phi: fmath::wrap_phase(phi),
        })
    }

    pub fn factor(&self) -> C64 {
        C64::new(self.rho * fmath::cos(self.phi), -self.rho * fmath::sin(self.phi))
    }
}

/// `e^{−h s}`.
pub fn delay_factor(s: C64, h: f64) -> C64 {
    let r = fmath::exp(-h * s.re);
    C64::new(r * fmath::cos(h * s.im), -r * fmath::sin(h * s.im))
}

/// Lifted coordinates of every delay factor at one `s`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Lift {
    pub internal: Vec<Polar>,
    pub external: Vec<Polar>,
}

/// `ρ_k = e^{−h_k σ}` and `φ_k = h_k ω mod 2π` for `s = σ + iω`.
pub fn lift_at(s: C64, h: &[f64], hp: &[f64]) -> Result<Lift> {
    let f = |v: &[f64]| -> Result<Vec<Polar>> {
        v.iter()
            .map(|&hk| {
                if !(hk >= 0.0) {
                    return Err(Error::NegativeDelay(hk));
                }
                Polar::new(fmath::exp(-hk * s.re), hk * s.im)
            })
            .collect()
    };
    Ok(Lift {
        internal: f(h)?,
        external: f(hp)?,
    })
}

/// A delay-system point with lifted delay factors.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LiftedPoint {
    pub point: DelayPoint,
    pub internal: Vec<Polar>,
    pub external: Vec<Polar>,
}

impl LiftedPoint {
    pub fn new(point: DelayPoint, lift: Lift) -> Self {
        Self {
            point,
            internal: lift.internal,
            external: lift.external,
        }
    }
}

/// Outcome of [`consistency_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Consistency {
    /// No delays to constrain.
    Vacuous,
    /// Every pair comes from `s = K + iK'`.
    Consistent { k: f64, k_prime: f64 },
    Inconsistent,
}

impl Consistency {
    pub fn holds(&self) -> bool {
        !matches!(self, Consistency::Inconsistent)
    }
}

/// Decides whether lifted pairs come from one `s = σ + iω` with the given
/// delays: `−ln ρ_k / h_k` must agree (`K = σ`), and some `ω` with
/// `|ω| <= omega_max` must satisfy `h_k ω ≡ φ_k (mod 2π)` for every `k`
/// (`K'` is the one of smallest magnitude). Comparisons are relative to
/// `tol`.
pub fn consistency_check(
    internal: &[Polar],
    external: &[Polar],
    h: &[f64],
    hp: &[f64],
    tol: f64,
    omega_max: f64,
) -> Result<Consistency> {
    for (p, d) in [(internal, h), (external, hp)] {
        if p.len() != d.len() {
            return Err(Error::LengthMismatch {
                expected: d.len(),
                found: p.len(),
            });
        }
    }
    let pairs: Vec<(Polar, f64)> = internal
        .iter()
        .copied()
        .zip(h.iter().copied())
        .chain(external.iter().copied().zip(hp.iter().copied()))
        .collect();
    for (k, &(_, d)) in pairs.iter().enumerate() {
        if !(d >= 0.0) {
            return Err(Error::NegativeDelay(d));
        }
        if d == 0.0 {
            return Err(Error::ZeroDelayWithConstraint(k));
        }
    }
    if pairs.is_empty() {
        return Ok(Consistency::Vacuous);
    }

    let k = -fmath::ln(pairs[0].0.rho) / pairs[0].1;
    if pairs
        .iter()
        .any(|&(p, d)| (-fmath::ln(p.rho) / d - k).abs() > tol * k.abs().max(1.0))
    {
        return Ok(Consistency::Inconsistent);
    }

    let phase_ok = |w: f64| {
        pairs
            .iter()
            .all(|&(p, d)| fmath::phase_distance(d * w, p.phi) <= tol * (d * w).abs().max(1.0))
    };
    // Branches of the shortest delay are the sparsest candidate set.
    let &(pm, hm) = pairs
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal))
        .expect("nonempty");
    let lo = fmath::ceil((-omega_max * hm - pm.phi) / TWO_PI) as i64;
    let hi = fmath::floor((omega_max * hm - pm.phi) / TWO_PI) as i64;
    let mut best: Option<f64> = None;
    for n in lo..=hi {
        let w = (pm.phi + TWO_PI * n as f64) / hm;
        if phase_ok(w) && best.is_none_or(|b| w.abs() < b.abs()) {
            best = Some(w);
        }
    }
    Ok(match best {
        Some(w) => Consistency::Consistent { k, k_prime: w },
        None => Consistency::Inconsistent,
    })
}

/// Matrices of a delay system frozen at one parameter point.
#[derive(Clone, Debug)]
pub(crate) struct Frozen {
    a: ComplexMatrix,
    b: ComplexMatrix,
    c: ComplexMatrix,
    d: ComplexMatrix,
    internal: Vec<ComplexMatrix>,
    external: Vec<ComplexMatrix>,
}

impl Frozen {
    pub(crate) fn at(dsys: &DelaySystem, point: &DelayPoint, delta: &DelayDelta) -> Result<Self> {
        dsys.check_point(point)?;
        let total = |ch| dsys.base.total(ch, &point.base, &delta.base);
        let terms = |ts: &[DelayedTerm], ds: &[Vec<Vec<ComplexMatrix>>], z: &[C64]| -> Result<Vec<ComplexMatrix>> {
            ts.iter()
                .zip(ds)
                .map(|(t, d)| AffineMatrixFamily::new(t.effective(d)?)?.evaluate(z))
                .collect()
        };
        Ok(Self {
            a: total(Channel::A)?,
            b: total(Channel::B)?,
            c: total(Channel::C)?,
            d: total(Channel::D)?,
            internal: terms(&dsys.internal, &delta.internal, &point.ad)?,
            external: terms(&dsys.external, &delta.external, &point.bd)?,
        })
    }

    /// `A + Ã + Σ_j (A_j + Ã_j) w_j`.
    pub(crate) fn a_eff(&self, w: &[C64]) -> Result<ComplexMatrix> {
        let mut a = self.a.clone();
        for (m, &wj) in self.internal.iter().zip(w) {
            a.axpy(wj, m)?;
        }
        Ok(a)
    }

    fn b_eff(&self, w: &[C64]) -> Result<ComplexMatrix> {
        let mut b = self.b.clone();
        for (m, &wj) in self.external.iter().zip(w) {
            b.axpy(wj, m)?;
        }
        Ok(b)
    }

    /// PBH matrix with delay factors `wi` (state) and `we` (input).
    pub(crate) fn matrix(&self, kind: PbhKind, s: C64, wi: &[C64], we: &[C64]) -> Result<ComplexMatrix> {
        let a = self.a_eff(wi)?;
        let b = if kind == PbhKind::Observability {
            self.b.clone()
        } else {
            self.b_eff(we)?
        };
        assemble_from(kind, s, &a, &b, &self.c, &self.d)
    }
}

pub(crate) fn factors(s: C64, h: &[f64]) -> Vec<C64> {
    h.iter().map(|&hk| delay_factor(s, hk)).collect()
}

/// PBH matrix of a delay system at `s` with concrete delays: `A` and `B` are
/// replaced by `A + Ã + Σ_j (A_j + Ã_j) e^{−h_j s}` and
/// `B + B̃ + Σ_j (B_j + B̃_j) e^{−h'_j s}`; `C` and `D` are undelayed.
pub fn assemble_delay_pbh(
    dsys: &DelaySystem,
    kind: PbhKind,
    s: C64,
    point: &DelayPoint,
    delta: &DelayDelta,
    h: &[f64],
    hp: &[f64],
) -> Result<ComplexMatrix> {
    dsys.check_delays(h, hp)?;
    delta.check(dsys)?;
    Frozen::at(dsys, point, delta)?.matrix(kind, s, &factors(s, h), &factors(s, hp))
}

/// PBH matrix with every delay factor replaced by its lifted pair.
pub fn assemble_lifted_pbh(
    dsys: &DelaySystem,
    kind: PbhKind,
    s: C64,
    lifted: &LiftedPoint,
    delta: &DelayDelta,
) -> Result<ComplexMatrix> {
    for (found, expected) in [
        (lifted.internal.len(), dsys.internal.len()),
        (lifted.external.len(), dsys.external.len()),
    ] {
        if found != expected {
            return Err(Error::LengthMismatch { expected, found });
        }
    }
    delta.check(dsys)?;
    let wi: Vec<C64> = lifted.internal.iter().map(Polar::factor).collect();
    let we: Vec<C64> = lifted.external.iter().map(Polar::factor).collect();
    Frozen::at(dsys, &lifted.point, delta)?.matrix(kind, s, &wi, &we)
}
