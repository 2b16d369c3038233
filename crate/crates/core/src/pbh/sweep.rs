use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{assemble_pbh, cover_floor, cover_value, gram_order, nan_min, Analyzer, CheckOptions, PbhKind, Property, PropertyVerdict, Witness};
use crate::cover::{certify_positive, CoverBox, CoverCertificate, CoverOptions, CoverOutcome};
use crate::cxla::{spectral_norm, C64};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{Axis, BoxDomain, Channel, DeltaAssignment, Interval, LpvSystem, ParameterPoint, Part};

const MAX_REPORTED_WITNESSES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Verdict {
    Certified,
    Violated,
    Inconclusive,
}

/// Optional finite-cover certification of `det Ẑ(s, z) >= floor` over an
/// `s`-box times the domain, run after a clean grid sweep. The cover works on
/// `ln(1 + σ̲(Z))` against `ln(1 + floor^{1/(2r)})` (`r` the order of `Ẑ`),
/// which implies the determinant bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    pub floor: f64,
    pub budget: usize,
    /// `(σ range, ω range)`; derived from the grid when absent.
    pub s_box: Option<(Interval, Interval)>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            floor: 1e-8,
            budget: 100_000,
            s_box: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    /// Samples per non-degenerate real axis.
    pub grid: usize,
    /// Maximum number of parameter points evaluated.
    pub budget: usize,
    /// Number of local refinement passes around the tightest point.
    pub refine_depth: usize,
    /// Fixed uncertainty values; zero when absent.
    pub delta: Option<DeltaAssignment>,
    pub s_grid: Vec<C64>,
    pub certify: Option<CertifyOptions>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: crate::DEFAULT_TOL,
            grid: 9,
            budget: 100_000,
            refine_depth: 3,
            delta: None,
            s_grid: Vec::new(),
            certify: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DomainReport {
    pub property: Property,
    pub verdict: Verdict,
    pub points_tested: usize,
    pub refinement_depth: usize,
    pub min_sigma: Option<f64>,
    pub tightest: Option<Witness>,
    /// Failing pairs (at most 16, tightest first).
    pub witnesses: Vec<Witness>,
    pub tol: f64,
    pub grid: usize,
    pub budget: usize,
    pub sufficient_only: bool,
    pub certificate: Option<CoverCertificate>,
    pub notes: Vec<String>,
}

struct State {
    tested: usize,
    min_sigma: Option<f64>,
    tightest: Option<Witness>,
    failures: Vec<Witness>,
    sufficient_only: bool,
}

impl State {
    fn absorb(&mut self, v: PropertyVerdict) {
        self.sufficient_only |= v.sufficient_only;
        if let Some(m) = v.min_sigma {
            self.min_sigma = Some(self.min_sigma.map_or(m, |x| x.min(m)));
        }
        for w in v.witnesses {
            let tighter = self.tightest.as_ref().is_none_or(|t| w.ratio() < t.ratio());
            if w.fails() {
                self.failures.push(w.clone());
            }
            if tighter {
                self.tightest = Some(w);
            }
        }
    }
}

fn axis_value(ax: &Axis, p: &ParameterPoint) -> f64 {
    let z = p.tail(ax.channel)[ax.index];
    match ax.part {
        Part::Re => z.re,
        Part::Im => z.im,
    }
}

/// Evaluates `property` over a grid on `domain`, refines around the
/// tightest point, and optionally certifies the whole box with the cover
/// certifier.
pub fn sweep_domain<E: Executor>(
    sys: &LpvSystem,
    property: Property,
    domain: &BoxDomain,
    opts: &SweepOptions,
    exec: &E,
) -> Result<DomainReport> {
    if !domain.is_bounded() {
        return Err(Error::UnboundedDomain);
    }
    for (found, expected) in domain.lengths().into_iter().zip(sys.q()) {
        if found != expected {
            return Err(Error::LengthMismatch { expected, found });
        }
    }
    let delta = opts.delta.clone().unwrap_or_else(|| sys.zero_delta());
    let needs_dual = matches!(
        property,
        Property::Observability | Property::Detectability | Property::Minimality
    );
    let analyzer = if needs_dual {
        Analyzer::with_dual(sys, &delta)?
    } else {
        Analyzer::new(sys, &delta)?
    };
    let check = CheckOptions {
        tol: opts.tol,
        s_grid: opts.s_grid.clone(),
    };
    let k = opts.grid.max(2);
    let axes = domain.axes();
    let mut st = State {
        tested: 0,
        min_sigma: None,
        tightest: None,
        failures: Vec::new(),
        sufficient_only: false,
    };
    let mut notes = Vec::new();

    // Returns false when the budget truncated the batch.
    let run = |pts: Vec<ParameterPoint>, st: &mut State| -> Result<bool> {
        let room = opts.budget.saturating_sub(st.tested);
        let take = room.min(pts.len());
        let results = exec.map(take, |i| analyzer.check(property, &pts[i], &check));
        st.tested += take;
        for r in results {
            st.absorb(r?);
        }
        Ok(take == pts.len())
    };

    let mut depth = 0;
    let mut complete = run(domain.grid(k), &mut st)?;
    if complete && st.failures.is_empty() && !axes.is_empty() {
        let mut spacing: Vec<f64> = axes
            .iter()
            .map(|a| a.interval.width() / (k - 1) as f64)
            .collect();
        for level in 1..=opts.refine_depth {
            let Some(t) = st.tightest.clone() else { break };
            let local = BoxDomain::new(
                local_segment(domain, &axes, &t.point, &spacing, Channel::A),
                local_segment(domain, &axes, &t.point, &spacing, Channel::B),
                local_segment(domain, &axes, &t.point, &spacing, Channel::C),
                local_segment(domain, &axes, &t.point, &spacing, Channel::D),
            );
            complete = run(local.grid(k), &mut st)?;
            depth = level;
            for h in &mut spacing {
                *h = 2.0 * *h / (k - 1) as f64;
            }
            if !complete || !st.failures.is_empty() {
                break;
            }
        }
    }

    let mut verdict = if !st.failures.is_empty() {
        Verdict::Violated
    } else if !complete {
        notes.push(format!(
            "point budget {} exhausted before the sweep finished",
            opts.budget
        ));
        Verdict::Inconclusive
    } else {
        Verdict::Certified
    };

    let mut certificate = None;
    if verdict == Verdict::Certified {
        if let Some(cert) = &opts.certify {
            let (v, c, note, extra) = certify_box(sys, property, domain, &analyzer, &check, cert, exec)?;
            verdict = v;
            certificate = c;
            notes.extend(note);
            st.failures.extend(extra);
        }
    }
    if st.sufficient_only {
        notes.push(String::from(
            "output matrix is rank deficient: s was sampled on the supplied grid only",
        ));
    }

    st.failures
        .sort_by(|a, b| a.ratio().partial_cmp(&b.ratio()).unwrap_or(core::cmp::Ordering::Equal));
    st.failures.truncate(MAX_REPORTED_WITNESSES);
    Ok(DomainReport {
        property,
        verdict,
        points_tested: st.tested,
        refinement_depth: depth,
        min_sigma: st.min_sigma,
        tightest: st.tightest,
        witnesses: st.failures,
        tol: opts.tol,
        grid: k,
        budget: opts.budget,
        sufficient_only: st.sufficient_only,
        certificate,
        notes,
    })
}

fn local_segment(
    domain: &BoxDomain,
    axes: &[Axis],
    center: &ParameterPoint,
    spacing: &[f64],
    ch: Channel,
) -> Vec<crate::model::ComplexInterval> {
    let mut seg: Vec<_> = domain.segment(ch).to_vec();
    for (ax, h) in axes.iter().zip(spacing) {
        if ax.channel != ch {
            continue;
        }
        let x = axis_value(ax, center);
        let iv = Interval {
            lo: (x - h).max(ax.interval.lo),
            hi: (x + h).min(ax.interval.hi),
        };
        match ax.part {
            Part::Re => seg[ax.index].re = iv,
            Part::Im => seg[ax.index].im = iv,
        }
    }
    seg
}

fn certify_box<E: Executor>(
    sys: &LpvSystem,
    property: Property,
    domain: &BoxDomain,
    analyzer: &Analyzer<'_>,
    check: &CheckOptions,
    cert: &CertifyOptions,
    exec: &E,
) -> Result<(Verdict, Option<CoverCertificate>, Vec<String>, Vec<Witness>)> {
    let delta = analyzer.delta();
    let axes = domain.axes();
    let mut notes = Vec::new();
    let (sig, om) = match cert.s_box {
        Some(b) => b,
        None => {
            let mut r: f64 = 0.0;
            for p in domain.grid(3) {
                r = r.max(spectral_norm(&sys.total(Channel::A, &p, delta)?));
            }
            let r = 1.25 * r + 0.1;
            notes.push(format!("s-box |Re s|, |Im s| <= {r:.6} from the sampled norm of A + Ã"));
            (Interval { lo: -r, hi: r }, Interval { lo: -r, hi: r })
        }
    };
    let sig = if property.closed_rhp_only() {
        Interval {
            lo: sig.lo.max(0.0),
            hi: sig.hi.max(0.0),
        }
    } else {
        sig
    };
    let mut intervals = alloc::vec![sig, om];
    intervals.extend(axes.iter().map(|a| a.interval));
    let bx = CoverBox::new(intervals)?;
    let kinds: &[PbhKind] = match property {
        Property::Controllability | Property::Stabilizability => &[PbhKind::Controllability],
        Property::Observability | Property::Detectability => &[PbhKind::Observability],
        Property::OutputControllability => &[PbhKind::OutputControllability],
        Property::Minimality => &[PbhKind::Controllability, PbhKind::Observability],
    };
    let f = |x: &[f64]| -> f64 {
        let p = domain.point_at(&axes, &x[2..]);
        let s = C64::new(x[0], x[1]);
        kinds
            .iter()
            .map(|&k| {
                assemble_pbh(sys, k, s, &p, delta).map_or(f64::NAN, |z| cover_value(&z))
            })
            .fold(f64::INFINITY, nan_min)
    };
    let copts = CoverOptions {
        floor: cover_floor(cert.floor, gram_order(property, sys.n, sys.p)),
        budget: cert.budget,
        ..CoverOptions::default()
    };
    match certify_positive(f, &bx, &copts, exec)? {
        CoverOutcome::Certified(c) => Ok((Verdict::Certified, Some(c), notes, Vec::new())),
        CoverOutcome::Witness { point, value, .. } => {
            let p = domain.point_at(&axes, &point[2..]);
            let s = C64::new(point[0], point[1]);
            let pv = analyzer.check(property, &p, check)?;
            notes.push(format!(
                "cover found ln(1 + σ̲) = {value:.3e} below the floor at s = {:.6}{:+.6}i",
                s.re, s.im
            ));
            if pv.holds {
                Ok((Verdict::Inconclusive, None, notes, Vec::new()))
            } else {
                Ok((Verdict::Violated, None, notes, pv.witnesses))
            }
        }
        CoverOutcome::Inconclusive { cells_examined, .. } => {
            notes.push(format!("cover budget exhausted after {cells_examined} cells"));
            Ok((Verdict::Inconclusive, None, notes, Vec::new()))
        }
    }
}
