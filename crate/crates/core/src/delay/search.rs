use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{factors, DelayDelta, DelayDomain, DelayPoint, DelaySystem, Frozen, Lift, Polar, TWO_PI};
use crate::cover::{certify_positive, CoverBox, CoverCertificate, CoverOptions, CoverOutcome};
use crate::cxla::{determinant, eigenvalues, rank_threshold, spectral_norm, svd_extremes, C64};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fmath;
use crate::model::{Axis, BoxDomain, Interval};
use crate::pbh::{cover_floor, cover_value, gram_order, nan_min, sweep_domain, DomainReport, PbhKind, Property, SweepOptions, Verdict};

const POLISH_STEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum DelayMode {
    /// Lifted delay factors are free coordinates.
    Independent,
    /// Delays are fixed.
    Dependent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayOptions {
    pub tol: f64,
    /// Floor `δ̲` on `det Ẑ`; the cover runs on `ln(1 + σ̲(Z))` against
    /// `ln(1 + δ̲^{1/(2r)})`.
    pub floor: f64,
    /// Cover cells.
    pub budget: usize,
    /// Slack in `ln ρ` and in phase when matching a lifted witness to delays.
    pub screen_tol: f64,
    /// `(σ range, ω range)`; derived from norm bounds when absent.
    pub search_box: Option<(Interval, Interval)>,
    /// Uncertainty values; zero when absent.
    pub delta: Option<DelayDelta>,
    /// Hand instances without delays to the PBH sweep.
    pub reduce_delay_free: bool,
    /// Samples per axis for that sweep.
    pub grid: usize,
    /// Extra `s` values for output controllability in that sweep.
    pub s_grid: Vec<C64>,
}

impl Default for DelayOptions {
    fn default() -> Self {
        Self {
            tol: crate::DEFAULT_TOL,
            floor: 1e-8,
            budget: 100_000,
            screen_tol: 1e-3,
            search_box: None,
            delta: None,
            reduce_delay_free: true,
            grid: 9,
            s_grid: Vec::new(),
        }
    }
}

/// Whether the lifted coordinates of a witness can come from admissible
/// delays at the witness `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Screening {
    /// `any_delay`: every admissible delay tuple matches.
    Feasible { any_delay: bool },
    /// No admissible delay matches pair `index` (external pairs follow the
    /// internal ones).
    Spurious { index: usize },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayWitness {
    /// Point returned by the cover.
    pub s: C64,
    pub point: DelayPoint,
    /// Lifted pairs (independent mode).
    pub lift: Option<Lift>,
    /// `ln(1 + σ̲)` at the cover point.
    pub cover_value: f64,
    pub screening: Option<Screening>,
    /// Delays used for confirmation.
    pub internal_delays: Vec<f64>,
    pub external_delays: Vec<f64>,
    /// `s` after moving onto a characteristic root.
    pub polished_s: C64,
    pub sigma_min: f64,
    pub threshold: f64,
    pub confirmed: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayReport {
    pub property: Property,
    pub mode: DelayMode,
    pub verdict: Verdict,
    pub sigma: Interval,
    pub omega: Interval,
    /// Delay bounds (independent mode) or delays (dependent mode).
    pub internal_delays: Vec<f64>,
    pub external_delays: Vec<f64>,
    pub tol: f64,
    pub floor: f64,
    pub budget: usize,
    pub certificate: Option<CoverCertificate>,
    pub witness: Option<DelayWitness>,
    pub cells_examined: usize,
    /// Sweep report when the instance had no delays.
    pub reduced: Option<DomainReport>,
    pub notes: Vec<String>,
}

fn kinds(property: Property) -> &'static [PbhKind] {
    match property {
        Property::Controllability | Property::Stabilizability => &[PbhKind::Controllability],
        Property::Observability | Property::Detectability => &[PbhKind::Observability],
        Property::OutputControllability => &[PbhKind::OutputControllability],
        Property::Minimality => &[PbhKind::Controllability, PbhKind::Observability],
    }
}

struct Setup<'a> {
    dsys: &'a DelaySystem,
    domain: &'a DelayDomain,
    merged: BoxDomain,
    axes: Vec<Axis>,
    delta: DelayDelta,
    kinds: &'static [PbhKind],
    fixed: Option<Frozen>,
    floor_value: f64,
}

impl<'a> Setup<'a> {
    fn new(dsys: &'a DelaySystem, domain: &'a DelayDomain, property: Property, opts: &DelayOptions) -> Result<Self> {
        domain.check(dsys)?;
        if !(opts.floor > 0.0 && opts.floor.is_finite()) {
            return Err(Error::InvalidOption(format!("floor must be positive, got {}", opts.floor)));
        }
        let delta = opts.delta.clone().unwrap_or_else(|| dsys.zero_delta());
        delta.check(dsys)?;
        let merged = domain.merged();
        let axes = merged.axes();
        let fixed = if axes.is_empty() {
            Some(Frozen::at(dsys, &domain.center(), &delta)?)
        } else {
            None
        };
        Ok(Self {
            dsys,
            domain,
            merged,
            axes,
            delta,
            kinds: kinds(property),
            fixed,
            floor_value: cover_floor(opts.floor, gram_order(property, dsys.base.n, dsys.base.p)),
        })
    }

    fn point(&self, vals: &[f64]) -> DelayPoint {
        self.domain.split(&self.merged.point_at(&self.axes, vals))
    }

    fn frozen(&self, vals: &[f64]) -> Result<Frozen> {
        match &self.fixed {
            Some(f) => Ok(f.clone()),
            None => Frozen::at(self.dsys, &self.point(vals), &self.delta),
        }
    }

    fn uses_external(&self) -> bool {
        self.kinds.iter().any(|&k| k != PbhKind::Observability)
    }

    /// Smallest `ln(1 + σ̲)` over the property's PBH kinds.
    fn sigma(&self, fz: &Frozen, s: C64, wi: &[C64], we: &[C64]) -> f64 {
        self.kinds
            .iter()
            .map(|&k| fz.matrix(k, s, wi, we).map_or(f64::NAN, |z| cover_value(&z)))
            .fold(f64::INFINITY, nan_min)
    }

    /// `(σ, ω)` ranges. Rank loss needs `s` in the spectrum of
    /// `A + Ã + Σ_j (A_j + Ã_j) w_j`, so `|s| <= r0 + Σ_j ρ_j n_j` with
    /// `ρ_j = e^{h_j r0}` (or 1 on the right half-plane).
    fn search_box(&self, h: &[f64], rhp: bool, opts: &DelayOptions, notes: &mut Vec<String>) -> Result<(Interval, Interval)> {
        let (sig, om) = match opts.search_box {
            Some((sig, om)) => {
                if !(sig.is_bounded() && om.is_bounded()) {
                    return Err(Error::UnboundedSearchBox);
                }
                (sig, om)
            }
            None => {
                let mut r0: f64 = 0.0;
                let mut nj = vec![0.0f64; h.len()];
                for p in self.merged.grid(3) {
                    let fz = Frozen::at(self.dsys, &self.domain.split(&p), &self.delta)?;
                    r0 = r0.max(spectral_norm(&fz.a));
                    for (n, m) in nj.iter_mut().zip(&fz.internal) {
                        *n = n.max(spectral_norm(m));
                    }
                }
                let r1 = r0
                    + h.iter()
                        .zip(&nj)
                        .map(|(&hj, &n)| if rhp { n } else { fmath::exp(hj * r0) * n })
                        .sum::<f64>();
                let r = 1.25 * r1 + 0.1;
                if !r.is_finite() {
                    return Err(Error::UnboundedSearchBox);
                }
                notes.push(format!("search box |Re s|, |Im s| <= {r:.6} from sampled norm bounds"));
                (Interval { lo: -r, hi: r }, Interval { lo: -r, hi: r })
            }
        };
        let sig = if rhp {
            Interval {
                lo: sig.lo.max(0.0),
                hi: sig.hi.max(0.0),
            }
        } else {
            sig
        };
        Ok((sig, om))
    }

    fn cover_options(&self, opts: &DelayOptions) -> CoverOptions {
        CoverOptions {
            floor: self.floor_value,
            budget: opts.budget,
            ..CoverOptions::default()
        }
    }
}

fn report(
    property: Property,
    mode: DelayMode,
    box_: (Interval, Interval),
    h: Vec<f64>,
    hp: Vec<f64>,
    opts: &DelayOptions,
    notes: Vec<String>,
) -> DelayReport {
    DelayReport {
        property,
        mode,
        verdict: Verdict::Inconclusive,
        sigma: box_.0,
        omega: box_.1,
        internal_delays: h,
        external_delays: hp,
        tol: opts.tol,
        floor: opts.floor,
        budget: opts.budget,
        certificate: None,
        witness: None,
        cells_examined: 0,
        reduced: None,
        notes,
    }
}

fn reduce<E: Executor>(setup: &Setup<'_>, property: Property, opts: &DelayOptions, exec: &E, out: &mut DelayReport) -> Result<()> {
    let sys = setup.dsys.collapse(&setup.delta)?;
    let sweep = SweepOptions {
        tol: opts.tol,
        grid: opts.grid,
        budget: opts.budget,
        s_grid: opts.s_grid.clone(),
        ..SweepOptions::default()
    };
    let r = sweep_domain(&sys, property, &setup.merged, &sweep, exec)?;
    out.verdict = r.verdict;
    out.notes.push(String::from("no delays: decided by the PBH sweep of the delay-free system"));
    out.reduced = Some(r);
    Ok(())
}

struct Confirmation {
    s: C64,
    sigma_min: f64,
    threshold: f64,
    confirmed: bool,
}

/// Looks for a rank drop near `s0` with the delays fixed. For the spectral
/// kinds a rank drop sits on a root of `g(s) = det(sI − A_eff(s))`, which is
/// refined by Newton from `s0` and from the eigenvalue of `A_eff(s0)` nearest
/// to it.
fn confirm(kinds: &[PbhKind], fz: &Frozen, s0: C64, h: &[f64], hp: &[f64], rhp: bool, tol: f64) -> Result<Confirmation> {
    let eval = |s: C64| -> Result<Confirmation> {
        let (wi, we) = (factors(s, h), factors(s, hp));
        let mut best: Option<Confirmation> = None;
        for &k in kinds {
            let (lo, hi) = svd_extremes(&fz.matrix(k, s, &wi, &we)?)?;
            let thr = rank_threshold(hi, tol);
            let c = Confirmation {
                s,
                sigma_min: lo,
                threshold: thr,
                confirmed: lo <= thr && (!rhp || s.re >= -tol),
            };
            if best.as_ref().is_none_or(|b| lo / thr < b.sigma_min / b.threshold) {
                best = Some(c);
            }
        }
        Ok(best.expect("at least one kind"))
    };
    let mut best = eval(s0)?;
    if best.confirmed {
        return Ok(best);
    }
    let spectral = kinds
        .iter()
        .any(|k| matches!(k, PbhKind::Controllability | PbhKind::Observability));
    if !spectral {
        return Ok(best);
    }
    let g = |s: C64| -> Result<C64> { determinant(&fz.a_eff(&factors(s, h))?.shifted_neg(s)?) };
    let mut starts = vec![s0];
    if let Some(e) = eigenvalues(&fz.a_eff(&factors(s0, h))?)?
        .into_iter()
        .min_by(|x, y| (x - s0).norm().total_cmp(&(y - s0).norm()))
    {
        starts.push(e);
    }
    for start in starts {
        let mut s = start;
        for _ in 0..POLISH_STEPS {
            let eps = 1e-6 * s.norm().max(1.0);
            let d = (g(s + eps)? - g(s - eps)?) / (2.0 * eps);
            let gs = g(s)?;
            if !(d.norm() > 0.0) || !gs.is_finite() {
                break;
            }
            let mut step = gs / d;
            let cap = s.norm().max(1.0);
            if step.norm() > cap {
                step *= cap / step.norm();
            }
            s -= step;
            let c = eval(s)?;
            if c.confirmed {
                return Ok(c);
            }
            if c.sigma_min / c.threshold < best.sigma_min / best.threshold {
                best = c;
            }
            if step.norm() <= 1e-15 * s.norm().max(1.0) {
                break;
            }
        }
    }
    Ok(best)
}

/// Range of `ln ρ = −hσ` for `h ∈ [0, h̄]`, `σ` in `sig`.
fn log_modulus_range(hbar: f64, sig: Interval) -> Interval {
    Interval {
        lo: (-hbar * sig.hi).min(0.0),
        hi: (-hbar * sig.lo).max(0.0),
    }
}

/// Range of the unwrapped phase `hω`, or the full circle when it is wider.
fn phase_range(hbar: f64, om: Interval) -> Interval {
    let lo = (hbar * om.lo).min(0.0);
    let hi = (hbar * om.hi).max(0.0);
    if hi - lo >= TWO_PI {
        Interval { lo: 0.0, hi: TWO_PI }
    } else {
        Interval { lo, hi }
    }
}

fn lifted_factor(lambda: f64, phi: f64) -> C64 {
    let r = fmath::exp(lambda);
    C64::new(r * fmath::cos(phi), -r * fmath::sin(phi))
}

/// A delay in `[0, h̄]` with `|ln ρ + hσ| <= tol` and `hω ≡ φ` within `tol`,
/// and whether every delay in `[0, h̄]` qualifies.
fn screen_one(p: Polar, hbar: f64, s: C64, tol: f64) -> Option<(f64, bool)> {
    let lambda = fmath::ln(p.rho);
    let (mut lo, mut hi): (f64, f64) = (0.0, hbar);
    if s.re != 0.0 {
        let a = (-lambda - tol) / s.re;
        let b = (-lambda + tol) / s.re;
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    } else if lambda.abs() > tol {
        return None;
    }
    if lo > hi {
        return None;
    }
    let (a, b) = if s.im >= 0.0 { (lo * s.im, hi * s.im) } else { (hi * s.im, lo * s.im) };
    let target = p.phi + TWO_PI * fmath::ceil((a - tol - p.phi) / TWO_PI);
    if target > b + tol {
        return None;
    }
    let h = if s.im != 0.0 { (target / s.im).clamp(lo, hi) } else { hi };
    let any = (s.re.abs() * hbar <= tol)
        && (s.im.abs() * hbar <= tol)
        && lambda.abs() <= tol
        && fmath::phase_distance(p.phi, 0.0) <= tol;
    Some((h, any))
}

/// Certifies the property for every admissible delay by treating each lifted
/// factor `ρ e^{−iφ}` as a free coordinate. This is only sufficient; a cover
/// witness is screened against the delay intervals and confirmed at matching
/// delays before the property is reported as violated.
pub fn delay_independent_test<E: Executor>(
    dsys: &DelaySystem,
    domain: &DelayDomain,
    property: Property,
    opts: &DelayOptions,
    exec: &E,
) -> Result<DelayReport> {
    let setup = Setup::new(dsys, domain, property, opts)?;
    let rhp = property.closed_rhp_only();
    let (hbar, hpbar) = (dsys.internal_bounds(), dsys.external_bounds());
    let mut notes = Vec::new();
    let (sig, om) = setup.search_box(&hbar, rhp, opts, &mut notes)?;
    let mut out = report(property, DelayMode::Independent, (sig, om), hbar.clone(), hpbar.clone(), opts, notes);
    if opts.reduce_delay_free && hbar.iter().chain(&hpbar).all(|&h| h == 0.0) {
        reduce(&setup, property, opts, exec, &mut out)?;
        return Ok(out);
    }

    let ni = hbar.len();
    let ne = if setup.uses_external() { hpbar.len() } else { 0 };
    let mut iv = vec![sig, om];
    for &hb in hbar.iter().chain(&hpbar[..ne]) {
        iv.push(log_modulus_range(hb, sig));
        iv.push(phase_range(hb, om));
    }
    let off = 2 + 2 * (ni + ne);
    iv.extend(setup.axes.iter().map(|a| a.interval));
    let bx = CoverBox::new(iv)?;
    let pair = |x: &[f64], j: usize| lifted_factor(x[2 + 2 * j], x[3 + 2 * j]);
    let f = |x: &[f64]| -> f64 {
        let wi: Vec<C64> = (0..ni).map(|j| pair(x, j)).collect();
        let mut we: Vec<C64> = (ni..ni + ne).map(|j| pair(x, j)).collect();
        we.resize(hpbar.len(), C64::new(1.0, 0.0));
        match setup.frozen(&x[off..]) {
            Ok(fz) => setup.sigma(&fz, C64::new(x[0], x[1]), &wi, &we),
            Err(_) => f64::NAN,
        }
    };

    match certify_positive(f, &bx, &setup.cover_options(opts), exec)? {
        CoverOutcome::Certified(c) => {
            out.verdict = Verdict::Certified;
            out.cells_examined = c.cells_examined;
            out.certificate = Some(c);
            out.notes.push(String::from(
                "lifted delay factors were free coordinates: certified for every admissible delay",
            ));
        }
        CoverOutcome::Witness {
            point: x,
            value,
            cells_examined,
        } => {
            out.cells_examined = cells_examined;
            let s = C64::new(x[0], x[1]);
            let polar = |j: usize| Polar::new(fmath::exp(x[2 + 2 * j]).max(f64::MIN_POSITIVE), x[3 + 2 * j]);
            let lift = Lift {
                internal: (0..ni).map(polar).collect::<Result<_>>()?,
                external: (ni..ni + ne).map(polar).collect::<Result<_>>()?,
            };
            let mut h = Vec::with_capacity(ni);
            let mut hp = vec![0.0; hpbar.len()];
            let mut any_delay = true;
            let mut spurious = None;
            for (k, (&p, &hb)) in lift.internal.iter().chain(&lift.external).zip(hbar.iter().chain(&hpbar)).enumerate() {
                match screen_one(p, hb, s, opts.screen_tol) {
                    Some((hk, any)) => {
                        any_delay &= any;
                        if k < ni {
                            h.push(hk);
                        } else {
                            hp[k - ni] = hk;
                        }
                    }
                    None => {
                        spurious = Some(k);
                        break;
                    }
                }
            }
            let point = setup.point(&x[off..]);
            let mut w = DelayWitness {
                s,
                point: point.clone(),
                lift: Some(lift),
                cover_value: value,
                screening: None,
                internal_delays: h.clone(),
                external_delays: hp.clone(),
                polished_s: s,
                sigma_min: f64::NAN,
                threshold: f64::NAN,
                confirmed: false,
            };
            if let Some(index) = spurious {
                w.screening = Some(Screening::Spurious { index });
                out.notes.push(format!(
                    "cover witness at s = {:.6}{:+.6}i matches no admissible delay for pair {index}; the free-coordinate test is only sufficient",
                    s.re, s.im
                ));
            } else {
                w.screening = Some(Screening::Feasible { any_delay });
                let fz = Frozen::at(dsys, &point, &setup.delta)?;
                let c = confirm(setup.kinds, &fz, s, &h, &hp, rhp, opts.tol)?;
                fill(&mut w, &c);
                if c.confirmed {
                    out.verdict = Verdict::Violated;
                    if any_delay && c.s.norm() <= opts.tol {
                        out.notes.push(String::from("rank drop at s = 0 holds for every admissible delay"));
                    }
                } else {
                    out.notes.push(String::from(
                        "cover witness matches admissible delays but no rank drop was confirmed",
                    ));
                }
            }
            out.witness = Some(w);
        }
        CoverOutcome::Inconclusive { cells_examined, .. } => {
            out.cells_examined = cells_examined;
            out.notes.push(format!("cover budget exhausted after {cells_examined} cells"));
        }
    }
    Ok(out)
}

fn fill(w: &mut DelayWitness, c: &Confirmation) {
    w.polished_s = c.s;
    w.sigma_min = c.sigma_min;
    w.threshold = c.threshold;
    w.confirmed = c.confirmed;
}

/// Certifies the property for fixed delays `h` (state) and `hp` (input) by
/// covering `(σ, ω)` times the domain with the delay factors evaluated
/// exactly.
pub fn delay_dependent_test<E: Executor>(
    dsys: &DelaySystem,
    domain: &DelayDomain,
    h: &[f64],
    hp: &[f64],
    property: Property,
    opts: &DelayOptions,
    exec: &E,
) -> Result<DelayReport> {
    dsys.check_delays(h, hp)?;
    let setup = Setup::new(dsys, domain, property, opts)?;
    let rhp = property.closed_rhp_only();
    let mut notes = Vec::new();
    let (sig, om) = setup.search_box(h, rhp, opts, &mut notes)?;
    let mut out = report(property, DelayMode::Dependent, (sig, om), h.to_vec(), hp.to_vec(), opts, notes);
    if opts.reduce_delay_free && h.iter().chain(hp).all(|&v| v == 0.0) {
        reduce(&setup, property, opts, exec, &mut out)?;
        return Ok(out);
    }

    let mut iv = vec![sig, om];
    iv.extend(setup.axes.iter().map(|a| a.interval));
    let bx = CoverBox::new(iv)?;
    let f = |x: &[f64]| -> f64 {
        let s = C64::new(x[0], x[1]);
        match setup.frozen(&x[2..]) {
            Ok(fz) => setup.sigma(&fz, s, &factors(s, h), &factors(s, hp)),
            Err(_) => f64::NAN,
        }
    };
    match certify_positive(f, &bx, &setup.cover_options(opts), exec)? {
        CoverOutcome::Certified(c) => {
            out.verdict = Verdict::Certified;
            out.cells_examined = c.cells_examined;
            out.certificate = Some(c);
        }
        CoverOutcome::Witness {
            point: x,
            value,
            cells_examined,
        } => {
            out.cells_examined = cells_examined;
            let s = C64::new(x[0], x[1]);
            let point = setup.point(&x[2..]);
            let fz = Frozen::at(dsys, &point, &setup.delta)?;
            let c = confirm(setup.kinds, &fz, s, h, hp, rhp, opts.tol)?;
            let mut w = DelayWitness {
                s,
                point,
                lift: None,
                cover_value: value,
                screening: None,
                internal_delays: h.to_vec(),
                external_delays: hp.to_vec(),
                polished_s: s,
                sigma_min: f64::NAN,
                threshold: f64::NAN,
                confirmed: false,
            };
            fill(&mut w, &c);
            if c.confirmed {
                out.verdict = Verdict::Violated;
            } else {
                out.notes.push(format!(
                    "smallest singular value fell below the floor at s = {:.6}{:+.6}i but no rank drop was confirmed",
                    s.re, s.im
                ));
            }
            out.witness = Some(w);
        }
        CoverOutcome::Inconclusive { cells_examined, .. } => {
            out.cells_examined = cells_examined;
            out.notes.push(format!("cover budget exhausted after {cells_examined} cells"));
        }
    }
    Ok(out)
}
