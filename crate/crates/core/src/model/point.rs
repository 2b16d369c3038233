use alloc::vec;
use alloc::vec::Vec;

use super::Channel;
use crate::cxla::C64;
use crate::error::{Error, Result};

/// Parameter tails for the four channels. The fixed leading coordinate
/// `z_0 = 1` is implicit and never stored.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParameterPoint {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub c: Vec<C64>,
    pub d: Vec<C64>,
}

impl ParameterPoint {
    pub fn new(a: Vec<C64>, b: Vec<C64>, c: Vec<C64>, d: Vec<C64>) -> Self {
        Self { a, b, c, d }
    }

    /// All-zero tails of the given lengths.
    pub fn zeros(q: [usize; 4]) -> Self {
        let z = |k| vec![C64::new(0.0, 0.0); k];
        Self::new(z(q[0]), z(q[1]), z(q[2]), z(q[3]))
    }

    pub fn tail(&self, ch: Channel) -> &[C64] {
        match ch {
            Channel::A => &self.a,
            Channel::B => &self.b,
            Channel::C => &self.c,
            Channel::D => &self.d,
        }
    }

    pub fn tail_mut(&mut self, ch: Channel) -> &mut Vec<C64> {
        match ch {
            Channel::A => &mut self.a,
            Channel::B => &mut self.b,
            Channel::C => &mut self.c,
            Channel::D => &mut self.d,
        }
    }

    /// Tail with the implicit leading 1 prepended.
    pub fn full(&self, ch: Channel) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.tail(ch).len() + 1);
        v.push(C64::new(1.0, 0.0));
        v.extend_from_slice(self.tail(ch));
        v
    }

    /// `‖(1, z_1, …)‖²` for one channel.
    pub fn full_norm_sqr(&self, ch: Channel) -> f64 {
        1.0 + self.tail(ch).iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn lengths(&self) -> [usize; 4] {
        [self.a.len(), self.b.len(), self.c.len(), self.d.len()]
    }

    pub fn conj(&self) -> Self {
        let cj = |v: &[C64]| v.iter().map(|z| z.conj()).collect();
        Self::new(cj(&self.a), cj(&self.b), cj(&self.c), cj(&self.d))
    }

    pub fn is_real(&self) -> bool {
        Channel::ALL
            .iter()
            .all(|&ch| self.tail(ch).iter().all(|z| z.im == 0.0))
    }

    /// The matching point of the dual system: conjugated, with the B and C
    /// tails swapped.
    pub fn dual(&self) -> Self {
        let cj = |v: &[C64]| v.iter().map(|z| z.conj()).collect();
        Self::new(cj(&self.a), cj(&self.c), cj(&self.b), cj(&self.d))
    }
}

/// Closed real interval; infinite endpoints are representable so that
/// unbounded requests can be rejected with a proper error.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::EmptyBox);
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `k` evenly spaced samples including both endpoints (one sample if
    /// degenerate).
    pub fn samples(&self, k: usize) -> Vec<f64> {
        if self.is_degenerate() || k <= 1 {
            return vec![if self.is_degenerate() { self.lo } else { self.mid() }];
        }
        (0..k)
            .map(|i| {
                if i == k - 1 {
                    self.hi
                } else {
                    self.lo + self.width() * (i as f64) / ((k - 1) as f64)
                }
            })
            .collect()
    }
}

/// Axis-aligned box for one complex coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ComplexInterval {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexInterval {
    pub fn real(re: Interval) -> Self {
        Self {
            re,
            im: Interval::point(0.0),
        }
    }

    pub fn point(z: C64) -> Self {
        Self {
            re: Interval::point(z.re),
            im: Interval::point(z.im),
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }
}

/// Which part of a complex coordinate a real axis refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Part {
    Re,
    Im,
}

/// One non-degenerate real axis of a [`BoxDomain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub channel: Channel,
    pub index: usize,
    pub part: Part,
    pub interval: Interval,
}

/// Bounded box in parameter space, one complex interval per stored
/// coordinate, grouped by channel.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoxDomain {
    pub a: Vec<ComplexInterval>,
    pub b: Vec<ComplexInterval>,
    pub c: Vec<ComplexInterval>,
    pub d: Vec<ComplexInterval>,
}

impl BoxDomain {
    pub fn new(
        a: Vec<ComplexInterval>,
        b: Vec<ComplexInterval>,
        c: Vec<ComplexInterval>,
        d: Vec<ComplexInterval>,
    ) -> Self {
        Self { a, b, c, d }
    }

    /// The single point `p`.
    pub fn singleton(p: &ParameterPoint) -> Self {
        let f = |v: &[C64]| v.iter().map(|&z| ComplexInterval::point(z)).collect();
        Self::new(f(&p.a), f(&p.b), f(&p.c), f(&p.d))
    }

    pub fn segment(&self, ch: Channel) -> &[ComplexInterval] {
        match ch {
            Channel::A => &self.a,
            Channel::B => &self.b,
            Channel::C => &self.c,
            Channel::D => &self.d,
        }
    }

    pub fn lengths(&self) -> [usize; 4] {
        [self.a.len(), self.b.len(), self.c.len(), self.d.len()]
    }

    pub fn is_bounded(&self) -> bool {
        Channel::ALL.iter().all(|&ch| {
            self.segment(ch)
                .iter()
                .all(|ci| ci.re.is_bounded() && ci.im.is_bounded())
        })
    }

    /// No coordinate has an imaginary extent and all imaginary parts are 0.
    pub fn is_real(&self) -> bool {
        Channel::ALL.iter().all(|&ch| {
            self.segment(ch)
                .iter()
                .all(|ci| ci.im.lo == 0.0 && ci.im.hi == 0.0)
        })
    }

    pub fn contains(&self, p: &ParameterPoint) -> bool {
        p.lengths() == self.lengths()
            && Channel::ALL.iter().all(|&ch| {
                self.segment(ch)
                    .iter()
                    .zip(p.tail(ch))
                    .all(|(ci, &z)| ci.contains(z))
            })
    }

    /// Non-degenerate real axes in a fixed order (channel, index, re, im).
    pub fn axes(&self) -> Vec<Axis> {
        let mut out = Vec::new();
        for ch in Channel::ALL {
            for (index, ci) in self.segment(ch).iter().enumerate() {
                for (part, interval) in [(Part::Re, ci.re), (Part::Im, ci.im)] {
                    if !interval.is_degenerate() {
                        out.push(Axis {
                            channel: ch,
                            index,
                            part,
                            interval,
                        });
                    }
                }
            }
        }
        out
    }

    /// Lower corner on every axis.
    pub fn lower_point(&self) -> ParameterPoint {
        let f = |v: &[ComplexInterval]| v.iter().map(|ci| C64::new(ci.re.lo, ci.im.lo)).collect();
        ParameterPoint::new(f(&self.a), f(&self.b), f(&self.c), f(&self.d))
    }

    pub fn center(&self) -> ParameterPoint {
        let f = |v: &[ComplexInterval]| v.iter().map(|ci| C64::new(ci.re.mid(), ci.im.mid())).collect();
        ParameterPoint::new(f(&self.a), f(&self.b), f(&self.c), f(&self.d))
    }

    /// Point whose non-degenerate axes take `values` (in [`Self::axes`]
    /// order); degenerate axes sit at their fixed value.
    pub fn point_at(&self, axes: &[Axis], values: &[f64]) -> ParameterPoint {
        let mut p = self.lower_point();
        for (ax, &v) in axes.iter().zip(values) {
            let z = &mut p.tail_mut(ax.channel)[ax.index];
            match ax.part {
                Part::Re => z.re = v,
                Part::Im => z.im = v,
            }
        }
        p
    }

    /// Tensor grid with `k` samples per non-degenerate axis.
    pub fn grid(&self, k: usize) -> Vec<ParameterPoint> {
        let axes = self.axes();
        let samples: Vec<Vec<f64>> = axes.iter().map(|a| a.interval.samples(k)).collect();
        tensor(&samples)
            .into_iter()
            .map(|vals| self.point_at(&axes, &vals))
            .collect()
    }

    /// Grid points lying on the boundary of the box (at least one axis at an
    /// endpoint). A box without free axes yields its single point.
    pub fn boundary_grid(&self, k: usize) -> Vec<ParameterPoint> {
        let axes = self.axes();
        if axes.is_empty() {
            return vec![self.lower_point()];
        }
        let samples: Vec<Vec<f64>> = axes.iter().map(|a| a.interval.samples(k)).collect();
        tensor(&samples)
            .into_iter()
            .filter(|vals| {
                axes.iter()
                    .zip(vals)
                    .any(|(a, &v)| v == a.interval.lo || v == a.interval.hi)
            })
            .map(|vals| self.point_at(&axes, &vals))
            .collect()
    }

    pub fn conj(&self) -> Self {
        let f = |v: &[ComplexInterval]| {
            v.iter()
                .map(|ci| ComplexInterval {
                    re: ci.re,
                    im: Interval {
                        lo: -ci.im.hi,
                        hi: -ci.im.lo,
                    },
                })
                .collect()
        };
        Self::new(f(&self.a), f(&self.b), f(&self.c), f(&self.d))
    }

    /// Domain of the dual system (see [`ParameterPoint::dual`]).
    pub fn dual(&self) -> Self {
        let c = self.conj();
        Self::new(c.a, c.c, c.b, c.d)
    }
}

/// Cartesian product of sample lists, last axis fastest.
pub(crate) fn tensor(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for s in samples {
        let mut next = Vec::with_capacity(out.len() * s.len());
        for prefix in &out {
            for &x in s {
                let mut v = prefix.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
