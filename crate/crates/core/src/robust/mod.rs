//! Preservation radii for controllability and observability under structured
//! perturbations, and explicit structured perturbations that destroy them.
//!
//! The radius uses the spectral constants of `Ẑ(iω, z) = Z(iω, z) Z(iω, z)*`
//! on a truncated imaginary axis `|ω| <= Ω`: `ε` is the smallest eigenvalue
//! seen anywhere on the sampled domain, `δ_0` the largest on its boundary.
//! The lifted bound is `δ = √(δ_0² + ε) − δ_0`, and the bound on the stacked
//! uncertainty is `δ / √sup(‖z^(A)‖² + ‖z^(X)‖²)` with the implicit leading
//! ones included.
//!
//! The radius only accounts for the imaginary axis. A perturbation that moves
//! an eigenvalue to a point where `Z` is already close to rank deficient is
//! not covered, so [`verify_sampled`] re-checks perturbations explicitly.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cxla::{
    eigenvalues, kron, lstsq_min_norm, null_space, rank_threshold, smallest_right_singular_vector,
    spectral_norm, svd_extremes, vec_norm, ComplexMatrix, C64,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fmath;
use crate::model::{tensor, BoxDomain, Channel, DeltaAssignment, LpvSystem, ParameterPoint};
use crate::pbh::{
    assemble_pbh, check_property_at, sweep_domain, CheckOptions, PbhKind, Property, SweepOptions, Verdict,
    Witness,
};

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusOptions {
    pub tol: f64,
    /// Samples per non-degenerate real axis of the domain.
    pub grid: usize,
    /// Frequencies on `[−Ω, Ω]`; rounded up to an odd count so `ω = 0` is hit.
    pub omega_points: usize,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            tol: crate::DEFAULT_TOL,
            grid: 9,
            omega_points: 201,
        }
    }
}

/// Spectral constants of the nominal Gram matrix on the sampled set.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundConstants {
    pub eps_c0: f64,
    pub delta_c0: f64,
    /// Frequency truncation `Ω = 2(1 + sup ‖A(z)‖₂)`.
    pub omega: f64,
    pub omega_samples: usize,
    /// Only `ω >= 0` was evaluated (real system on a real domain).
    pub half_axis: bool,
    pub points: usize,
    pub boundary_points: usize,
    pub eps_omega: f64,
    pub eps_point: ParameterPoint,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RadiusResult {
    pub property: Property,
    pub eps_c0: f64,
    pub delta_c0: f64,
    pub delta: f64,
    pub block_bound: f64,
    pub omega_truncation: f64,
    pub omega_samples: usize,
    pub half_axis: bool,
    pub grid: usize,
    pub points: usize,
    pub boundary_points: usize,
    /// `sup (‖z^(A)‖² + ‖z^(X)‖²)` over the sampled points.
    pub tuple_norm_sqr: f64,
    pub eps_omega: f64,
    pub eps_point: ParameterPoint,
    pub notes: Vec<String>,
}

/// How a violating perturbation was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ViolationMethod {
    /// Input (output) matrix projected off a left (right) eigenvector.
    EigenvectorProjection,
    /// Minimum-norm input (output) perturbation annihilating the eigenvector
    /// coupling.
    EigenvectorConstraint,
    /// State perturbation placing an eigenvector in the null space of the
    /// input (output) matrix.
    NullSpaceEigenvalue,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ViolationWitness {
    pub property: Property,
    pub point: ParameterPoint,
    pub delta: DeltaAssignment,
    pub s0: C64,
    pub sigma_min: f64,
    pub threshold: f64,
    /// `σ̄` of the stacked uncertainty.
    pub norm: f64,
    pub method: ViolationMethod,
}

/// Outcome of re-checking explicit perturbations.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SampleCheck {
    pub samples: usize,
    pub points: usize,
    pub skipped_inadmissible: usize,
    /// `(sample index, failing witness)`.
    pub failures: Vec<(usize, Witness)>,
}

fn uses_dual(property: Property) -> Result<bool> {
    match property {
        Property::Controllability | Property::Stabilizability => Ok(false),
        Property::Observability | Property::Detectability => Ok(true),
        Property::Minimality => Err(Error::UnsupportedProperty(
            "minimality combines two constant pairs",
        )),
        Property::OutputControllability => Err(Error::UnsupportedProperty("output controllability radius")),
    }
}

fn partner(dual: bool) -> Channel {
    if dual {
        Channel::C
    } else {
        Channel::B
    }
}

fn check_domain(sys: &LpvSystem, domain: &BoxDomain) -> Result<()> {
    if !domain.is_bounded() {
        return Err(Error::UnboundedDomain);
    }
    for (found, expected) in domain.lengths().into_iter().zip(sys.q()) {
        if found != expected {
            return Err(Error::LengthMismatch { expected, found });
        }
    }
    Ok(())
}

fn nominal_sweep<E: Executor>(
    sys: &LpvSystem,
    domain: &BoxDomain,
    property: Property,
    tol: f64,
    grid: usize,
    exec: &E,
) -> Result<Verdict> {
    let opts = SweepOptions {
        tol,
        grid,
        ..SweepOptions::default()
    };
    Ok(sweep_domain(sys, property, domain, &opts, exec)?.verdict)
}

/// Grid points of `domain` with a flag marking the boundary ones.
fn sampled_points(domain: &BoxDomain, k: usize) -> (Vec<ParameterPoint>, Vec<bool>) {
    let axes = domain.axes();
    let samples: Vec<Vec<f64>> = axes.iter().map(|a| a.interval.samples(k)).collect();
    let combos = tensor(&samples);
    let boundary = combos
        .iter()
        .map(|v| {
            axes.is_empty()
                || axes
                    .iter()
                    .zip(v)
                    .any(|(a, &x)| x == a.interval.lo || x == a.interval.hi)
        })
        .collect();
    let points = combos.iter().map(|v| domain.point_at(&axes, v)).collect();
    (points, boundary)
}

/// Symmetric frequency grid with `0` and `±Ω` hit exactly.
fn omega_grid(omega: f64, count: usize, half: bool) -> Vec<f64> {
    let n = (count.max(3)) | 1;
    let mid = n / 2;
    let step = omega / mid as f64;
    let start = if half { mid } else { 0 };
    (start..n)
        .map(|k| match k {
            0 => -omega,
            k if k == mid => 0.0,
            k if k == n - 1 => omega,
            k => (k as f64 - mid as f64) * step,
        })
        .collect()
}

/// `ε`, `δ_0` and `Ω` for the controllability Gram matrix of `sys` (already
/// dualized by the caller for observability).
fn ctrb_constants<E: Executor>(
    sys: &LpvSystem,
    domain: &BoxDomain,
    opts: &RadiusOptions,
    exec: &E,
) -> Result<BoundConstants> {
    let k = opts.grid.max(2);
    let (points, boundary) = sampled_points(domain, k);
    let norms = exec.map(points.len(), |i| sys.nominal(Channel::A, &points[i]).map(|a| spectral_norm(&a)));
    let mut sup_a: f64 = 0.0;
    for (nrm, &b) in norms.into_iter().zip(&boundary) {
        let nrm = nrm?;
        if b {
            sup_a = sup_a.max(nrm);
        }
    }
    let omega = 2.0 * (1.0 + sup_a);
    let half = sys.is_real() && domain.is_real();
    let ws = omega_grid(omega, opts.omega_points, half);
    let zero = sys.zero_delta();
    let nw = ws.len();
    let vals = exec.map(points.len() * nw, |idx| {
        let (pi, wi) = (idx / nw, idx % nw);
        let z = assemble_pbh(sys, PbhKind::Controllability, C64::new(0.0, ws[wi]), &points[pi], &zero)?;
        svd_extremes(&z)
    });
    let mut eps = f64::INFINITY;
    let mut eps_at = (0, 0);
    let mut eps_sigma_max = 0.0;
    let mut delta_c0: f64 = 0.0;
    for (idx, v) in vals.into_iter().enumerate() {
        let (lo, hi) = v?;
        let (pi, wi) = (idx / nw, idx % nw);
        if lo * lo < eps {
            eps = lo * lo;
            eps_at = (pi, wi);
            eps_sigma_max = hi;
        }
        if boundary[pi] {
            delta_c0 = delta_c0.max(hi * hi);
        }
    }
    if fmath::sqrt(eps) <= rank_threshold(eps_sigma_max, opts.tol) {
        return Err(Error::NominalPropertyFails);
    }
    Ok(BoundConstants {
        eps_c0: eps,
        delta_c0,
        omega,
        omega_samples: nw,
        half_axis: half,
        points: points.len(),
        boundary_points: boundary.iter().filter(|&&b| b).count(),
        eps_omega: ws[eps_at.1],
        eps_point: points[eps_at.0].clone(),
    })
}

/// Spectral constants `(ε, δ_0, Ω)` for controllability, stabilizability,
/// observability or detectability of the nominal system on `domain`.
///
/// Observability constants are those of the dual system on the dual domain;
/// the reported `eps_point` is mapped back to the original coordinates.
pub fn bound_constants<E: Executor>(
    sys: &LpvSystem,
    domain: &BoxDomain,
    property: Property,
    opts: &RadiusOptions,
    exec: &E,
) -> Result<BoundConstants> {
    let dual = uses_dual(property)?;
    check_domain(sys, domain)?;
    if nominal_sweep(sys, domain, property, opts.tol, opts.grid, exec)? != Verdict::Certified {
        return Err(Error::NominalPropertyFails);
    }
    if dual {
        let mut c = ctrb_constants(&sys.dual(), &domain.dual(), opts, exec)?;
        c.eps_point = c.eps_point.dual();
        Ok(c)
    } else {
        ctrb_constants(sys, domain, opts, exec)
    }
}

/// Lifted bound `√(δ_0² + ε) − δ_0`, evaluated in a cancellation-free form.
pub fn lifted_bound(eps_c0: f64, delta_c0: f64) -> f64 {
    eps_c0 / (fmath::sqrt(delta_c0 * delta_c0 + eps_c0) + delta_c0)
}

/// Preservation radius for `property`. Minimality reports the smaller of the
/// controllability and observability radii.
pub fn preservation_radius<E: Executor>(
    sys: &LpvSystem,
    domain: &BoxDomain,
    property: Property,
    opts: &RadiusOptions,
    exec: &E,
) -> Result<RadiusResult> {
    if property == Property::Minimality {
        let c = preservation_radius(sys, domain, Property::Controllability, opts, exec)?;
        let o = preservation_radius(sys, domain, Property::Observability, opts, exec)?;
        let (mut r, which) = if o.block_bound < c.block_bound {
            (o, "observability")
        } else {
            (c, "controllability")
        };
        r.property = Property::Minimality;
        r.notes.push(format!("minimum of the two radii; limited by {which}"));
        return Ok(r);
    }
    let dual = uses_dual(property)?;
    let k = bound_constants(sys, domain, property, opts, exec)?;
    let delta = lifted_bound(k.eps_c0, k.delta_c0);
    let other = partner(dual);
    let (points, _) = sampled_points(domain, opts.grid.max(2));
    let tuple = points
        .iter()
        .map(|p| p.full_norm_sqr(Channel::A) + p.full_norm_sqr(other))
        .fold(0.0, f64::max);
    let block_bound = delta / fmath::sqrt(tuple);
    let notes = vec![
        format!(
            "frequency axis truncated at |w| <= {:.6}; beyond it the smallest Gram eigenvalue grows at least like w^2/2",
            k.omega
        ),
        String::from(
            "bound from the perturbation lemma on the imaginary axis; eigenvalue migration is not covered, use sampled re-verification",
        ),
    ];
    Ok(RadiusResult {
        property,
        eps_c0: k.eps_c0,
        delta_c0: k.delta_c0,
        delta,
        block_bound,
        omega_truncation: k.omega,
        omega_samples: k.omega_samples,
        half_axis: k.half_axis,
        grid: opts.grid.max(2),
        points: k.points,
        boundary_points: k.boundary_points,
        tuple_norm_sqr: tuple,
        eps_omega: k.eps_omega,
        eps_point: k.eps_point,
        notes,
    })
}

/// `σ̄` of the stacked uncertainty relevant to `property`: `(A, B)` for the
/// input side, the adjoint pair `(A*, C*)` for the output side, and the
/// larger of the two for minimality.
pub fn stacked_norm(sys: &LpvSystem, property: Property, delta: &DeltaAssignment) -> Result<f64> {
    match property {
        Property::Minimality => Ok(stacked_norm(sys, Property::Controllability, delta)?
            .max(stacked_norm(sys, Property::Observability, delta)?)),
        p => {
            if uses_dual(p)? {
                Ok(spectral_norm(&sys.dual().stacked_delta(&sys.dual_delta(delta)?)?))
            } else {
                Ok(spectral_norm(&sys.stacked_delta(delta)?))
            }
        }
    }
}

/// Whether `delta` lies strictly inside the radius.
pub fn is_admissible(sys: &LpvSystem, delta: &DeltaAssignment, radius: &RadiusResult) -> Result<bool> {
    Ok(stacked_norm(sys, radius.property, delta)? < radius.block_bound)
}

/// Re-checks the property for every `(delta, point)` pair. Perturbations
/// outside the radius are skipped and counted.
pub fn verify_sampled<E: Executor>(
    sys: &LpvSystem,
    radius: &RadiusResult,
    deltas: &[DeltaAssignment],
    points: &[ParameterPoint],
    opts: &CheckOptions,
    exec: &E,
) -> Result<SampleCheck> {
    let mut admissible = Vec::with_capacity(deltas.len());
    let mut skipped = 0;
    for (i, d) in deltas.iter().enumerate() {
        if is_admissible(sys, d, radius)? {
            admissible.push(i);
        } else {
            skipped += 1;
        }
    }
    let np = points.len();
    let results = exec.map(admissible.len() * np, |idx| {
        let di = admissible[idx / np];
        check_property_at(sys, radius.property, &points[idx % np], &deltas[di], opts)
    });
    let mut failures = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        let v = r?;
        if !v.holds {
            let w = v.tightest().cloned().expect("failing verdict carries a witness");
            failures.push((admissible[idx / np], w));
        }
    }
    Ok(SampleCheck {
        samples: admissible.len(),
        points: np,
        skipped_inadmissible: skipped,
        failures,
    })
}

fn row(v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_vec(1, v.len(), v.iter().map(|z| z.conj()).collect()).expect("row vector")
}

fn matvec(m: &ComplexMatrix, x: &[C64]) -> Result<Vec<C64>> {
    Ok(m.try_mul(&ComplexMatrix::column(x))?.as_slice().to_vec())
}

/// Minimum-norm structured solution of a linear condition on the
/// perturbation of channel `ch`. `coef(D, E)` is the coefficient matrix of
/// `vec(Δ_ij)` before the `z_i` factor. Returns `None` when the residual
/// exceeds `tol · max(1, ‖rhs‖)`.
fn solve_structured(
    sys: &LpvSystem,
    ch: Channel,
    point: &ParameterPoint,
    rhs: &[C64],
    tol: f64,
    coef: impl Fn(&ComplexMatrix, &ComplexMatrix) -> Result<ComplexMatrix>,
) -> Result<Option<DeltaAssignment>> {
    let cs = sys.pert.get(ch);
    if cs.is_trivial() {
        return Ok(None);
    }
    let z = point.full(ch);
    let mut m: Option<ComplexMatrix> = None;
    for (i, _, d) in cs.iter() {
        let c = coef(d, &cs.e)?.scale(z[i]);
        m = Some(match m {
            None => c,
            Some(acc) => acc.hstack(&c)?,
        });
    }
    let Some(m) = m else { return Ok(None) };
    let x = lstsq_min_norm(&m, rhs, 1e-12)?;
    let fit = matvec(&m, &x)?;
    let resid: Vec<C64> = fit.iter().zip(rhs).map(|(a, b)| a - b).collect();
    if vec_norm(&resid) > tol * vec_norm(rhs).max(1.0) {
        return Ok(None);
    }
    let mut delta = sys.zero_delta();
    let mut off = 0;
    for (i, j, d) in cs.iter() {
        let size = d.cols() * cs.ell();
        *delta.block_mut(ch, i, j) = ComplexMatrix::from_vec(d.cols(), cs.ell(), x[off..off + size].to_vec())?;
        off += size;
    }
    Ok(Some(delta))
}

struct Candidate {
    delta: DeltaAssignment,
    s0: C64,
    method: ViolationMethod,
}

/// Candidate perturbations at one point, grouped by preference.
fn candidates(
    sys: &LpvSystem,
    point: &ParameterPoint,
    dual: bool,
    rhp: bool,
    tol: f64,
) -> Result<Vec<Candidate>> {
    let ch = partner(dual);
    let a = sys.nominal(Channel::A, point)?;
    let x = sys.nominal(ch, point)?;
    let mut out = Vec::new();
    let lambdas: Vec<C64> = eigenvalues(&a)?
        .into_iter()
        .filter(|l| !rhp || l.re >= -tol)
        .collect();
    let mut vectors = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        let pencil = a.shifted_neg(l)?;
        // Left eigenvector for the input side, right eigenvector for the
        // output side; both unit norm.
        let (_, v) = smallest_right_singular_vector(&if dual { pencil } else { pencil.adjoint() })?;
        vectors.push(v);
    }

    // Projection: X̃ = −X q q* (output side) or −q q* X (input side).
    for (&l, v) in lambdas.iter().zip(&vectors) {
        let vcol = ComplexMatrix::column(v);
        let proj = vcol.try_mul(&vcol.adjoint())?;
        let target = if dual { -(x.try_mul(&proj)?) } else { -(proj.try_mul(&x)?) };
        let sol = solve_structured(sys, ch, point, target.as_slice(), tol, |d, e| kron(d, &e.transpose()))?;
        if let Some(delta) = sol {
            out.push(Candidate {
                delta,
                s0: l,
                method: ViolationMethod::EigenvectorProjection,
            });
        }
    }

    // Constraint only on the coupling: q* X̃ = −q* X or X̃ v = −X v.
    for (&l, v) in lambdas.iter().zip(&vectors) {
        let rhs: Vec<C64> = if dual {
            matvec(&x, v)?.into_iter().map(|c| -c).collect()
        } else {
            row(v).try_mul(&x)?.as_slice().iter().map(|c| -c).collect()
        };
        let sol = solve_structured(sys, ch, point, &rhs, tol, |d, e| {
            if dual {
                kron(d, &ComplexMatrix::column(&matvec(e, v)?).transpose())
            } else {
                kron(&row(v).try_mul(d)?, &e.transpose())
            }
        })?;
        if let Some(delta) = sol {
            out.push(Candidate {
                delta,
                s0: l,
                method: ViolationMethod::EigenvectorConstraint,
            });
        }
    }

    // State perturbation: make a null vector w of X* (or X) an eigenvector.
    let basis = null_space(&if dual { x.clone() } else { x.adjoint() }, tol)?;
    for k in 0..basis.cols() {
        let w = basis.col(k);
        let aw = matvec(&a, &w)?;
        let mut l: C64 = w.iter().zip(&aw).map(|(wi, ai)| wi.conj() * ai).sum();
        if rhp && l.re < 0.0 {
            l.re = 0.0;
        }
        let rhs: Vec<C64> = if dual {
            w.iter().zip(&aw).map(|(wi, ai)| l * wi - ai).collect()
        } else {
            let wa = row(&w).try_mul(&a)?;
            w.iter().zip(wa.as_slice()).map(|(wi, ai)| l * wi.conj() - ai).collect()
        };
        let sol = solve_structured(sys, Channel::A, point, &rhs, tol, |d, e| {
            if dual {
                kron(d, &ComplexMatrix::column(&matvec(e, &w)?).transpose())
            } else {
                kron(&row(&w).try_mul(d)?, &e.transpose())
            }
        })?;
        if let Some(delta) = sol {
            out.push(Candidate {
                delta,
                s0: l,
                method: ViolationMethod::NullSpaceEigenvalue,
            });
        }
    }
    Ok(out)
}

/// Builds a structured perturbation under which `property` fails somewhere
/// on `domain`, re-verified through the PBH checks.
///
/// Eigenvector projections are preferred; the coupling constraint and the
/// null-space construction are used only when no projection is realizable.
/// Within the preferred method the smallest stacked norm wins.
pub fn construct_violation<E: Executor>(
    sys: &LpvSystem,
    domain: &BoxDomain,
    property: Property,
    opts: &RadiusOptions,
    exec: &E,
) -> Result<ViolationWitness> {
    if property == Property::Minimality {
        let c = construct_violation(sys, domain, Property::Controllability, opts, exec);
        let o = construct_violation(sys, domain, Property::Observability, opts, exec);
        let mut best = match (c, o) {
            (Ok(c), Ok(o)) => {
                if o.norm < c.norm {
                    o
                } else {
                    c
                }
            }
            (Ok(w), Err(_)) | (Err(_), Ok(w)) => w,
            (Err(e), Err(_)) => return Err(e),
        };
        best.property = Property::Minimality;
        return Ok(best);
    }
    let dual = uses_dual(property)?;
    check_domain(sys, domain)?;
    if nominal_sweep(sys, domain, property, opts.tol, opts.grid, exec)? == Verdict::Violated {
        return Err(Error::NominalAlreadyViolated);
    }
    if sys.pert.get(Channel::A).is_trivial() && sys.pert.get(partner(dual)).is_trivial() {
        return Err(Error::NotExpressible);
    }
    let kind = if dual {
        PbhKind::Observability
    } else {
        PbhKind::Controllability
    };
    let check = CheckOptions {
        tol: opts.tol,
        s_grid: Vec::new(),
    };
    let mut points = vec![domain.center()];
    points.extend(domain.grid(3));
    let mut best: Option<ViolationWitness> = None;
    for point in &points {
        for c in candidates(sys, point, dual, property.closed_rhp_only(), opts.tol)? {
            let z = assemble_pbh(sys, kind, c.s0, point, &c.delta)?;
            let (lo, hi) = svd_extremes(&z)?;
            let threshold = rank_threshold(hi, opts.tol);
            if lo > threshold || check_property_at(sys, property, point, &c.delta, &check)?.holds {
                continue;
            }
            let norm = stacked_norm(sys, property, &c.delta)?;
            let better = best
                .as_ref()
                .is_none_or(|b| (c.method, norm) < (b.method, b.norm));
            if better {
                best = Some(ViolationWitness {
                    property,
                    point: point.clone(),
                    delta: c.delta,
                    s0: c.s0,
                    sigma_min: lo,
                    threshold,
                    norm,
                    method: c.method,
                });
            }
        }
    }
    best.ok_or(Error::NotExpressible)
}

#[cfg(test)]
mod tests;
