//! Popov-Belevitch-Hautus rank tests.
//!
//! Builds the spectral controllability, observability and output
//! controllability matrices and the system matrix, classifies decoupling,
//! invariant and transmission zeros, and decides structural properties at a
//! parameter point ([`check_property_at`]) or across a box ([`sweep_domain`]).
//!
//! Rank decisions compare the smallest singular value against
//! `tol · max(1, σ_max)` of the same matrix. Observability and detectability
//! are decided on the dual system through the controllability routine.

mod sweep;

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

pub use sweep::{sweep_domain, CertifyOptions, DomainReport, SweepOptions, Verdict};

use crate::cxla::{eigenvalues, numerical_rank, rank_threshold, svd_extremes, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::model::{Channel, DeltaAssignment, LpvSystem, ParameterPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum PbhKind {
    Controllability,
    Observability,
    OutputControllability,
    SystemMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ZeroKind {
    InputDecoupling,
    OutputDecoupling,
    InputOutputDecoupling,
    ExternalInputDecoupling,
    Invariant,
    Transmission,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Property {
    Controllability,
    Observability,
    OutputControllability,
    Stabilizability,
    Detectability,
    Minimality,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Controllability,
        Property::Observability,
        Property::OutputControllability,
        Property::Stabilizability,
        Property::Detectability,
        Property::Minimality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Controllability => "controllability",
            Property::Observability => "observability",
            Property::OutputControllability => "output-controllability",
            Property::Stabilizability => "stabilizability",
            Property::Detectability => "detectability",
            Property::Minimality => "minimality",
        }
    }

    /// Decided on the dual system.
    pub fn is_dual(self) -> bool {
        matches!(self, Property::Observability | Property::Detectability)
    }

    /// Only loci in the closed right half-plane are tested.
    pub fn closed_rhp_only(self) -> bool {
        matches!(self, Property::Stabilizability | Property::Detectability)
    }
}

/// One tested `(s, z)` pair.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Witness {
    pub s: C64,
    pub point: ParameterPoint,
    pub sigma_min: f64,
    pub threshold: f64,
}

impl Witness {
    /// `σ̲ / threshold`; below 1 means rank loss.
    pub fn ratio(&self) -> f64 {
        if self.threshold > 0.0 {
            self.sigma_min / self.threshold
        } else {
            f64::INFINITY
        }
    }

    pub fn fails(&self) -> bool {
        self.sigma_min <= self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PropertyVerdict {
    pub property: Property,
    pub holds: bool,
    /// Smallest `σ̲` over the tested set; `None` when nothing needed testing.
    pub min_sigma: Option<f64>,
    /// Failing pairs, or the tightest pair when everything passed.
    pub witnesses: Vec<Witness>,
    /// The tested set was a finite sample of an infinite one.
    pub sufficient_only: bool,
}

impl PropertyVerdict {
    pub fn tightest(&self) -> Option<&Witness> {
        self.witnesses
            .iter()
            .min_by(|a, b| a.ratio().partial_cmp(&b.ratio()).unwrap_or(core::cmp::Ordering::Equal))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    /// Extra `s` values for output controllability when `C + C̃` is rank
    /// deficient.
    pub s_grid: Vec<C64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: crate::DEFAULT_TOL,
            s_grid: Vec::new(),
        }
    }
}

/// PBH matrix of the given kind at `(s, z)` with perturbation values `delta`.
///
/// - Controllability: `(sI − A − Ã : B + B̃)`, `n x (n+m)`.
/// - Observability: `[sI − A − Ã ; C + C̃]`, `(n+p) x n`.
/// - OutputControllability: `(C + C̃)(sI − A − Ã : B + B̃) + (0 : D + D̃)`,
///   `p x (n+m)`.
/// - SystemMatrix: `[[sI − A − Ã, −B − B̃], [C + C̃, D + D̃]]`.
pub fn assemble_pbh(
    sys: &LpvSystem,
    kind: PbhKind,
    s: C64,
    point: &ParameterPoint,
    delta: &DeltaAssignment,
) -> Result<ComplexMatrix> {
    sys.check_point(point)?;
    let a = sys.total(Channel::A, point, delta)?;
    let b = sys.total(Channel::B, point, delta)?;
    let c = sys.total(Channel::C, point, delta)?;
    let d = sys.total(Channel::D, point, delta)?;
    assemble_from(kind, s, &a, &b, &c, &d)
}

/// PBH matrix of the given kind from explicit `(A, B, C, D)` values.
pub(crate) fn assemble_from(
    kind: PbhKind,
    s: C64,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
    d: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let pencil = a.shifted_neg(s)?;
    match kind {
        PbhKind::Controllability => pencil.hstack(b),
        PbhKind::Observability => pencil.vstack(c),
        PbhKind::OutputControllability => output_ctrb_matrix(&pencil, b, c, d),
        PbhKind::SystemMatrix => pencil.hstack(&(-b.clone()))?.vstack(&c.hstack(d)?),
    }
}

fn output_ctrb_matrix(
    pencil: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
    d: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let zc = pencil.hstack(b)?;
    let mut out = c.try_mul(&zc)?;
    let n = pencil.cols();
    for i in 0..d.rows() {
        for j in 0..d.cols() {
            out[(i, n + j)] += d[(i, j)];
        }
    }
    Ok(out)
}

/// Eigenvalues of `A(z) + Ã(z)`: the only places where the controllability
/// or observability matrix can lose rank.
pub fn eigen_loci(sys: &LpvSystem, point: &ParameterPoint, delta: &DeltaAssignment) -> Result<Vec<C64>> {
    sys.check_point(point)?;
    eigenvalues(&sys.total(Channel::A, point, delta)?)
}

/// Zero types of `s0` at `(z, Δ)`.
pub fn classify_zeros(
    sys: &LpvSystem,
    s0: C64,
    point: &ParameterPoint,
    delta: &DeltaAssignment,
    tol: f64,
) -> Result<BTreeSet<ZeroKind>> {
    let n = sys.n;
    let rank = |k| -> Result<usize> { numerical_rank(&assemble_pbh(sys, k, s0, point, delta)?, tol) };
    let rc = rank(PbhKind::Controllability)?;
    let ro = rank(PbhKind::Observability)?;
    let roc = rank(PbhKind::OutputControllability)?;
    let rs = rank(PbhKind::SystemMatrix)?;
    let mut out = BTreeSet::new();
    if rc < n {
        out.insert(ZeroKind::InputDecoupling);
    }
    if ro < n {
        out.insert(ZeroKind::OutputDecoupling);
    }
    if rc < n && ro < n {
        out.insert(ZeroKind::InputOutputDecoupling);
    }
    if roc < sys.p {
        out.insert(ZeroKind::ExternalInputDecoupling);
    }
    if rs < n + sys.m.min(sys.p) {
        out.insert(ZeroKind::Invariant);
        if rc == n && ro == n {
            out.insert(ZeroKind::Transmission);
        }
    }
    debug_assert!(
        !out.contains(&ZeroKind::Transmission)
            || (out.contains(&ZeroKind::Invariant)
                && !out.contains(&ZeroKind::InputDecoupling)
                && !out.contains(&ZeroKind::OutputDecoupling))
    );
    Ok(out)
}

/// Property checks for a fixed system and uncertainty value, with the dual
/// system prepared once for repeated use.
#[derive(Clone, Debug)]
pub struct Analyzer<'a> {
    sys: &'a LpvSystem,
    delta: DeltaAssignment,
    dual: Option<(LpvSystem, DeltaAssignment)>,
}

impl<'a> Analyzer<'a> {
    pub fn new(sys: &'a LpvSystem, delta: &DeltaAssignment) -> Result<Self> {
        delta.check(&sys.pert)?;
        Ok(Self {
            sys,
            delta: delta.clone(),
            dual: None,
        })
    }

    /// Same as [`Analyzer::new`] but with the dual system built up front.
    pub fn with_dual(sys: &'a LpvSystem, delta: &DeltaAssignment) -> Result<Self> {
        let mut a = Self::new(sys, delta)?;
        a.dual = Some((sys.dual(), sys.dual_delta(delta)?));
        Ok(a)
    }

    pub fn system(&self) -> &LpvSystem {
        self.sys
    }

    pub fn delta(&self) -> &DeltaAssignment {
        &self.delta
    }

    pub fn check(&self, property: Property, point: &ParameterPoint, opts: &CheckOptions) -> Result<PropertyVerdict> {
        self.sys.check_point(point)?;
        match property {
            Property::Controllability | Property::Stabilizability => {
                let probes = ctrb_probes(self.sys, point, &self.delta, opts.tol, property.closed_rhp_only())?;
                Ok(verdict(property, point, probes, false))
            }
            Property::Observability | Property::Detectability => {
                let owned;
                let (dsys, ddelta) = match &self.dual {
                    Some((s, d)) => (s, d),
                    None => {
                        owned = (self.sys.dual(), self.sys.dual_delta(&self.delta)?);
                        (&owned.0, &owned.1)
                    }
                };
                let mut probes = ctrb_probes(dsys, &point.dual(), ddelta, opts.tol, property.closed_rhp_only())?;
                for p in &mut probes {
                    p.s = p.s.conj();
                }
                Ok(verdict(property, point, probes, false))
            }
            Property::OutputControllability => {
                let (probes, sufficient_only) = output_probes(self.sys, point, &self.delta, opts)?;
                Ok(verdict(property, point, probes, sufficient_only))
            }
            Property::Minimality => {
                let c = self.check(Property::Controllability, point, opts)?;
                let o = self.check(Property::Observability, point, opts)?;
                Ok(merge(Property::Minimality, c, o))
            }
        }
    }
}

/// Decides `property` at `(z, Δ)`.
pub fn check_property_at(
    sys: &LpvSystem,
    property: Property,
    point: &ParameterPoint,
    delta: &DeltaAssignment,
    opts: &CheckOptions,
) -> Result<PropertyVerdict> {
    Analyzer::new(sys, delta)?.check(property, point, opts)
}

#[derive(Clone, Copy, Debug)]
struct Probe {
    s: C64,
    sigma_min: f64,
    threshold: f64,
}

fn probe(m: &ComplexMatrix, s: C64, tol: f64) -> Result<Probe> {
    let (lo, hi) = svd_extremes(m)?;
    Ok(Probe {
        s,
        sigma_min: lo,
        threshold: rank_threshold(hi, tol),
    })
}

fn in_closed_rhp(s: C64, tol: f64) -> bool {
    s.re >= -tol
}

fn ctrb_probes(
    sys: &LpvSystem,
    point: &ParameterPoint,
    delta: &DeltaAssignment,
    tol: f64,
    rhp_only: bool,
) -> Result<Vec<Probe>> {
    let a = sys.total(Channel::A, point, delta)?;
    let b = sys.total(Channel::B, point, delta)?;
    let mut out = Vec::new();
    for s in eigenvalues(&a)? {
        if rhp_only && !in_closed_rhp(s, tol) {
            continue;
        }
        out.push(probe(&a.shifted_neg(s)?.hstack(&b)?, s, tol)?);
    }
    Ok(out)
}

fn output_probes(
    sys: &LpvSystem,
    point: &ParameterPoint,
    delta: &DeltaAssignment,
    opts: &CheckOptions,
) -> Result<(Vec<Probe>, bool)> {
    let a = sys.total(Channel::A, point, delta)?;
    let b = sys.total(Channel::B, point, delta)?;
    let c = sys.total(Channel::C, point, delta)?;
    let d = sys.total(Channel::D, point, delta)?;
    let mut svals = eigenvalues(&a)?;
    let full_rank_c = numerical_rank(&c, opts.tol)? == sys.p;
    if !full_rank_c {
        if opts.s_grid.is_empty() {
            return Err(Error::MissingSGrid);
        }
        svals.extend_from_slice(&opts.s_grid);
    }
    let mut out = Vec::with_capacity(svals.len());
    for s in svals {
        let m = output_ctrb_matrix(&a.shifted_neg(s)?, &b, &c, &d)?;
        out.push(probe(&m, s, opts.tol)?);
    }
    Ok((out, !full_rank_c))
}

fn verdict(property: Property, point: &ParameterPoint, probes: Vec<Probe>, sufficient_only: bool) -> PropertyVerdict {
    let min_sigma = probes.iter().map(|p| p.sigma_min).reduce(f64::min);
    let to_w = |p: &Probe| Witness {
        s: p.s,
        point: point.clone(),
        sigma_min: p.sigma_min,
        threshold: p.threshold,
    };
    let failing: Vec<Witness> = probes
        .iter()
        .filter(|p| p.sigma_min <= p.threshold)
        .map(to_w)
        .collect();
    let holds = failing.is_empty();
    let witnesses = if holds {
        probes
            .iter()
            .map(to_w)
            .min_by(|a, b| a.ratio().partial_cmp(&b.ratio()).unwrap_or(core::cmp::Ordering::Equal))
            .into_iter()
            .collect()
    } else {
        failing
    };
    PropertyVerdict {
        property,
        holds,
        min_sigma,
        witnesses,
        sufficient_only,
    }
}

fn merge(property: Property, a: PropertyVerdict, b: PropertyVerdict) -> PropertyVerdict {
    let holds = a.holds && b.holds;
    let min_sigma = match (a.min_sigma, b.min_sigma) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    let mut witnesses = Vec::new();
    for v in [a, b] {
        if holds || !v.holds {
            witnesses.extend(v.witnesses);
        }
    }
    if holds {
        let t = witnesses
            .into_iter()
            .min_by(|a, b| a.ratio().partial_cmp(&b.ratio()).unwrap_or(core::cmp::Ordering::Equal));
        witnesses = t.into_iter().collect();
    }
    PropertyVerdict {
        property,
        holds,
        min_sigma,
        witnesses,
        sufficient_only: false,
    }
}

/// Order `r` of the Gram matrix `Ẑ` for the property's PBH matrices.
pub(crate) fn gram_order(property: Property, n: usize, p: usize) -> usize {
    match property {
        Property::OutputControllability => p,
        _ => n,
    }
}

/// Cover floor implying `det Ẑ >= floor`. Covers run on `ln(1 + σ̲(Z))`
/// against `ln(1 + floor^{1/(2r)})`, using `det Ẑ = Π σ_i² >= σ̲^{2r}`.
/// Near a rank drop the value behaves like `σ̲`, whose derivative is bounded
/// by that of `Z`; far from one it grows only logarithmically.
pub(crate) fn cover_floor(floor: f64, r: usize) -> f64 {
    crate::fmath::ln_1p(crate::fmath::exp(crate::fmath::ln(floor) / (2 * r.max(1)) as f64))
}

/// `ln(1 + σ̲(Z))`, NaN on failure.
pub(crate) fn cover_value(z: &ComplexMatrix) -> f64 {
    svd_extremes(z).map_or(f64::NAN, |(lo, _)| crate::fmath::ln_1p(lo))
}

/// Minimum that propagates NaN.
pub(crate) fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

/// Hermitian Gram matrix of the smaller side (`Z Z*` for wide `Z`, `Z* Z`
/// for tall `Z`) and its determinant, which is real and nonnegative.
pub fn gram_determinant(z: &ComplexMatrix) -> Result<f64> {
    let g = if z.rows() <= z.cols() {
        z.try_mul(&z.adjoint())?
    } else {
        z.adjoint().try_mul(z)?
    };
    Ok(crate::cxla::determinant(&g)?.re)
}
