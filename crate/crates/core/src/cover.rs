//! Finite-cover positivity certification on hyper-rectangles.
//!
//! [`certify_positive`] proves `f >= floor` on a box by tiling it with cells.
//! A cell is accepted when its anchor (lower corner) value minus the
//! first-order decrement `Σ_k width_k · M_k` stays above the floor, where
//! `M_k` bounds `|∂f/∂x_k|` on the cell. Cells that fail the test are bisected
//! along the coordinate with the largest `width_k · M_k`. Any sampled value at
//! or below the floor is returned as a witness.
//!
//! Derivative bounds are sampled central differences times a safety factor,
//! not rigorous interval enclosures.
//!
//! Cells are processed breadth-first in waves; each wave is evaluated through
//! an [`Executor`] and reduced in index order, so the outcome does not depend
//! on scheduling. A larger budget only extends the same sequence of waves.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{tensor, Interval};

/// Axis-aligned box of real coordinates.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoverBox {
    pub intervals: Vec<Interval>,
}

impl CoverBox {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        let b = Self { intervals };
        b.check()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    fn check(&self) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(Error::EmptyBox);
        }
        for iv in &self.intervals {
            if iv.lo.is_nan() || iv.hi.is_nan() || iv.lo > iv.hi {
                return Err(Error::EmptyBox);
            }
            if !iv.is_bounded() {
                return Err(Error::UnboundedSearchBox);
            }
        }
        Ok(())
    }

    pub fn lower(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.lo).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::mid).collect()
    }

    fn bisect(&self, k: usize) -> (CoverBox, CoverBox) {
        let iv = self.intervals[k];
        let mid = iv.mid();
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.intervals[k] = Interval { lo: iv.lo, hi: mid };
        hi.intervals[k] = Interval { lo: mid, hi: iv.hi };
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverOptions {
    pub floor: f64,
    /// Maximum number of cells examined.
    pub budget: usize,
    /// Multiplier applied to sampled derivative magnitudes.
    pub safety: f64,
    /// Use `dim · max_k(width_k) · max_k(M_k)` instead of `Σ_k width_k M_k`.
    pub uniform_step: bool,
    /// Cells are treated as slightly wider than they are.
    pub overlap: f64,
    /// Keep a record of every examined cell.
    pub record_cells: bool,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self {
            floor: 1e-8,
            budget: 100_000,
            safety: 2.0,
            uniform_step: false,
            overlap: 1e-12,
            record_cells: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum CellStatus {
    Certified,
    Split,
    Witness,
}

/// Audit record of one examined cell.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CellRecord {
    pub depth: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub anchor_value: f64,
    pub bounds: Vec<f64>,
    pub decrement: f64,
    pub status: CellStatus,
}

impl CellRecord {
    /// Re-checks the acceptance inequality of a certified cell.
    pub fn certifies(&self, floor: f64) -> bool {
        self.status == CellStatus::Certified && self.anchor_value - self.decrement >= floor
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoverCertificate {
    pub cells_examined: usize,
    pub cells_certified: usize,
    pub depth: usize,
    pub floor: f64,
    pub min_anchor_value: f64,
    /// Smallest `anchor_value − decrement − floor` over certified cells.
    pub min_margin: f64,
    pub max_step: f64,
    pub max_bound: f64,
    pub records: Vec<CellRecord>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum CoverOutcome {
    Certified(CoverCertificate),
    Witness {
        point: Vec<f64>,
        value: f64,
        cells_examined: usize,
    },
    Inconclusive {
        cells_examined: usize,
        depth: usize,
        pending: usize,
        min_value: f64,
    },
}

impl CoverOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CoverOutcome::Certified(_))
    }
}

struct Cell {
    bx: CoverBox,
    depth: usize,
}

enum CellResult {
    Certified { record: CellRecord, margin: f64 },
    Split { record: CellRecord, axis: usize },
    Witness { point: Vec<f64>, value: f64 },
}

fn subgrid(bx: &CoverBox) -> Vec<Vec<f64>> {
    let per_axis = if bx.dim() <= 3 { 3 } else { 2 };
    let samples: Vec<Vec<f64>> = bx.intervals.iter().map(|iv| iv.samples(per_axis)).collect();
    let mut pts = tensor(&samples);
    if per_axis == 2 {
        pts.push(bx.center());
    }
    pts
}

/// Central-difference step for a coordinate of the given width.
fn fd_step(iv: &Interval) -> f64 {
    let scale = iv.width().max(iv.lo.abs().max(iv.hi.abs()) * 1e-3).max(1e-6);
    scale * 1e-4
}

fn central_diff<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], k: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += h;
    xm[k] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Sampled bound on `|∂f/∂x_k|` over `bx`: central differences at the
/// cell subgrid (3 points per axis up to three dimensions, corners plus
/// center beyond) times `safety`.
pub fn derivative_bound_with<F: Fn(&[f64]) -> f64>(
    f: &F,
    bx: &CoverBox,
    k: usize,
    safety: f64,
) -> Result<f64> {
    bx.check()?;
    if k >= bx.dim() {
        return Err(Error::LengthMismatch {
            expected: bx.dim(),
            found: k,
        });
    }
    if bx.intervals[k].is_degenerate() {
        return Ok(0.0);
    }
    let h = fd_step(&bx.intervals[k]);
    let mut m: f64 = 0.0;
    for x in subgrid(bx) {
        let d = central_diff(f, &x, k, h).abs();
        m = m.max(if d.is_finite() { d } else { f64::INFINITY });
    }
    Ok(m * safety)
}

/// [`derivative_bound_with`] using the default safety factor 2.
pub fn derivative_bound<F: Fn(&[f64]) -> f64>(f: &F, bx: &CoverBox, k: usize) -> Result<f64> {
    derivative_bound_with(f, bx, k, 2.0)
}

fn examine<F: Fn(&[f64]) -> f64>(f: &F, cell: &Cell, opts: &CoverOptions) -> CellResult {
    let bx = &cell.bx;
    let d = bx.dim();
    let anchor = bx.lower();
    let anchor_value = f(&anchor);
    let record = |bounds: Vec<f64>, decrement: f64, status| CellRecord {
        depth: cell.depth,
        lower: anchor.clone(),
        upper: bx.intervals.iter().map(|iv| iv.hi).collect(),
        anchor_value,
        bounds,
        decrement,
        status,
    };
    if !(anchor_value > opts.floor) {
        return CellResult::Witness {
            point: anchor.clone(),
            value: anchor_value,
        };
    }

    let pts = subgrid(bx);
    let mut bounds = vec![0.0f64; d];
    for x in &pts {
        let v = f(x);
        if !(v > opts.floor) {
            return CellResult::Witness {
                point: x.clone(),
                value: v,
            };
        }
        for (k, bk) in bounds.iter_mut().enumerate() {
            if bx.intervals[k].is_degenerate() {
                continue;
            }
            let g = central_diff(f, x, k, fd_step(&bx.intervals[k])).abs();
            *bk = bk.max(if g.is_finite() { g } else { f64::INFINITY });
        }
    }
    for b in &mut bounds {
        *b *= opts.safety;
    }
    let widths: Vec<f64> = bx
        .intervals
        .iter()
        .map(|iv| if iv.is_degenerate() { 0.0 } else { iv.width() + opts.overlap })
        .collect();
    let decrement = if opts.uniform_step {
        let wmax = widths.iter().cloned().fold(0.0, f64::max);
        let mmax = bounds.iter().cloned().fold(0.0, f64::max);
        d as f64 * wmax * mmax
    } else {
        widths.iter().zip(&bounds).map(|(w, m)| w * m).sum()
    };
    let margin = anchor_value - decrement - opts.floor;
    if margin >= 0.0 {
        return CellResult::Certified {
            record: record(bounds, decrement, CellStatus::Certified),
            margin,
        };
    }
    let axis = (0..d)
        .filter(|&k| !bx.intervals[k].is_degenerate())
        .max_by(|&a, &b| {
            let wa = widths[a] * bounds[a];
            let wb = widths[b] * bounds[b];
            wa.partial_cmp(&wb)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    CellResult::Split {
        record: record(bounds, decrement, CellStatus::Split),
        axis,
    }
}

/// Certifies `f >= floor` on `bx`, finds a point with `f <= floor`, or gives
/// up after `opts.budget` cells.
pub fn certify_positive<F, E>(
    f: F,
    bx: &CoverBox,
    opts: &CoverOptions,
    exec: &E,
) -> Result<CoverOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    E: Executor,
{
    bx.check()?;
    let mut queue: VecDeque<Cell> = VecDeque::new();
    queue.push_back(Cell {
        bx: bx.clone(),
        depth: 0,
    });
    let mut examined = 0usize;
    let mut certified = 0usize;
    let mut depth = 0usize;
    let mut min_anchor = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut max_step: f64 = 0.0;
    let mut max_bound: f64 = 0.0;
    let mut records = Vec::new();

    while !queue.is_empty() {
        let remaining = opts.budget.saturating_sub(examined);
        if remaining == 0 {
            return Ok(CoverOutcome::Inconclusive {
                cells_examined: examined,
                depth,
                pending: queue.len(),
                min_value: min_anchor,
            });
        }
        let take = remaining.min(queue.len());
        let wave: Vec<Cell> = queue.drain(..take).collect();
        let results = exec.map(wave.len(), |i| examine(&f, &wave[i], opts));
        examined += wave.len();
        for (cell, res) in wave.into_iter().zip(results) {
            depth = depth.max(cell.depth);
            match res {
                CellResult::Witness { point, value } => {
                    let value = f(&point).min(value);
                    return Ok(CoverOutcome::Witness {
                        point,
                        value,
                        cells_examined: examined,
                    });
                }
                CellResult::Certified { record, margin } => {
                    certified += 1;
                    min_anchor = min_anchor.min(record.anchor_value);
                    min_margin = min_margin.min(margin);
                    for (iv, m) in cell.bx.intervals.iter().zip(&record.bounds) {
                        max_step = max_step.max(iv.width());
                        max_bound = max_bound.max(*m);
                    }
                    if opts.record_cells {
                        records.push(record);
                    }
                }
                CellResult::Split { record, axis } => {
                    min_anchor = min_anchor.min(record.anchor_value);
                    let (a, b) = cell.bx.bisect(axis);
                    queue.push_back(Cell {
                        bx: a,
                        depth: cell.depth + 1,
                    });
                    queue.push_back(Cell {
                        bx: b,
                        depth: cell.depth + 1,
                    });
                    if opts.record_cells {
                        records.push(record);
                    }
                }
            }
        }
    }
    Ok(CoverOutcome::Certified(CoverCertificate {
        cells_examined: examined,
        cells_certified: certified,
        depth,
        floor: opts.floor,
        min_anchor_value: min_anchor,
        min_margin,
        max_step,
        max_bound,
        records,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(iv: &[(f64, f64)]) -> CoverBox {
        CoverBox::new(iv.iter().map(|&(a, b)| Interval::new(a, b).unwrap()).collect()).unwrap()
    }

    fn opts(floor: f64) -> CoverOptions {
        CoverOptions {
            floor,
            ..CoverOptions::default()
        }
    }

    #[test]
    fn identity_on_positive_interval() {
        let out = certify_positive(|x: &[f64]| x[0], &bx(&[(1.0, 2.0)]), &opts(0.5), &Sequential).unwrap();
        assert!(out.is_certified());
    }

    #[test]
    fn identity_crossing_floor() {
        let f = |x: &[f64]| x[0];
        match certify_positive(f, &bx(&[(-1.0, 1.0)]), &opts(0.5), &Sequential).unwrap() {
            CoverOutcome::Witness { point, value, .. } => {
                assert!(value <= 0.5);
                assert_eq!(f(&point), value);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn parabola_certifies() {
        let f = |x: &[f64]| x[0] * x[0] + 2.0;
        let mut o = opts(1.0);
        o.record_cells = true;
        let out = certify_positive(f, &bx(&[(-4.0, 4.0)]), &o, &Sequential).unwrap();
        let CoverOutcome::Certified(cert) = out else {
            panic!("not certified");
        };
        assert!(cert.min_anchor_value >= 2.0 - 1e-12);
        for r in cert.records.iter().filter(|r| r.status == CellStatus::Certified) {
            assert!(r.certifies(1.0));
            let width = r.upper[0] - r.lower[0];
            assert!(r.anchor_value - width * r.bounds[0] >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn derivative_bound_examples() {
        let f = |x: &[f64]| x[0] * x[0] + 2.0;
        let m = derivative_bound(&f, &bx(&[(-4.0, 4.0)]), 0).unwrap();
        assert!(m >= 8.0 && (m - 16.0).abs() < 1e-3, "{m}");
        let c = |_: &[f64]| 3.0;
        assert!(derivative_bound(&c, &bx(&[(-1.0, 1.0)]), 0).unwrap() < 1e-9);
        let g = |x: &[f64]| x[0];
        assert!(derivative_bound(&g, &bx(&[(0.0, 1.0), (-2.0, 2.0)]), 1).unwrap() < 1e-9);
    }

    #[test]
    fn empty_and_unbounded_boxes() {
        assert_eq!(CoverBox::new(vec![]), Err(Error::EmptyBox));
        assert_eq!(
            CoverBox::new(vec![Interval::new(0.0, f64::INFINITY).unwrap()]),
            Err(Error::UnboundedSearchBox)
        );
    }

    #[test]
    fn zero_budget_is_inconclusive() {
        let mut o = opts(0.5);
        o.budget = 0;
        let out = certify_positive(|x: &[f64]| x[0], &bx(&[(1.0, 2.0)]), &o, &Sequential).unwrap();
        assert!(matches!(out, CoverOutcome::Inconclusive { .. }));
    }

    #[test]
    fn uniform_step_also_certifies() {
        let mut o = opts(1.0);
        o.uniform_step = true;
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1] + 2.0;
        let out = certify_positive(f, &bx(&[(-2.0, 2.0), (-1.0, 1.0)]), &o, &Sequential).unwrap();
        assert!(out.is_certified());
    }

    #[test]
    fn certified_boxes_survive_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 0.5 * (x[1] + 0.2).powi(2) + 0.1 * x[0] * x[1] + 0.2;
        let b = bx(&[(-1.0, 1.0), (-1.0, 1.0)]);
        let out = certify_positive(f, &b, &opts(0.05), &Sequential).unwrap();
        assert!(out.is_certified());
        for _ in 0..10_000 {
            let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            assert!(f(&x) > 0.05);
        }
    }

    proptest! {
        #[test]
        fn larger_budget_never_flips(c in -1.0f64..3.0, budget in 1usize..60) {
            let f = move |x: &[f64]| x[0] * x[0] - c * x[0] + 1.0;
            let b = bx(&[(-2.0, 2.0)]);
            let mut o = opts(0.25);
            o.budget = budget;
            let small = certify_positive(f, &b, &o, &Sequential).unwrap();
            o.budget = budget * 4;
            let large = certify_positive(f, &b, &o, &Sequential).unwrap();
            match small {
                CoverOutcome::Certified(_) => prop_assert!(large.is_certified()),
                CoverOutcome::Witness { point, .. } => match large {
                    CoverOutcome::Witness { point: p2, .. } => prop_assert_eq!(point, p2),
                    other => prop_assert!(false, "flipped to {:?}", other),
                },
                CoverOutcome::Inconclusive { .. } => {}
            }
        }
    }
}
