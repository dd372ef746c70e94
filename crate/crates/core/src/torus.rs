//! The circle group in its two roles: the node space `[0, 1)` carrying
//! Haar (Lebesgue) probability measure, and the phase circle `[0, 2π)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Period of the node circle.
pub const NODE_PERIOD: f64 = 1.0;
/// Period of the phase circle.
pub const PHASE_PERIOD: f64 = TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Circle {
    Node,
    Phase,
}

impl Circle {
    pub fn period(self) -> f64 {
        match self {
            Circle::Node => NODE_PERIOD,
            Circle::Phase => PHASE_PERIOD,
        }
    }
}

/// A point on one of the two circles, always stored reduced modulo the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    value: f64,
    circle: Circle,
}

impl TorusPoint {
    pub fn new(x: f64, circle: Circle) -> Result<Self> {
        Ok(Self {
            value: wrap(x, circle.period())?,
            circle,
        })
    }

    pub fn node(x: f64) -> Result<Self> {
        Self::new(x, Circle::Node)
    }

    pub fn phase(x: f64) -> Result<Self> {
        Self::new(x, Circle::Phase)
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn circle(self) -> Circle {
        self.circle
    }

    /// Shorter-arc distance; errors when the points sit on different circles.
    pub fn dist(self, other: TorusPoint) -> Result<f64> {
        if self.circle != other.circle {
            return Err(Error::PeriodMismatch(
                self.circle.period(),
                other.circle.period(),
            ));
        }
        Ok(circle_dist(self.value, other.value, self.circle.period()))
    }
}

/// Reduce `x` into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    Ok(wrap_unchecked(x, period))
}

/// `wrap` without validation, for hot loops over values known to be finite.
#[inline]
pub fn wrap_unchecked(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    wrap_unchecked(x, PHASE_PERIOD)
}

/// Shorter-arc distance between two reals on a circle of the given period.
#[inline]
pub fn circle_dist(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d).max(0.0)
}

/// Uniform partition of the node circle into `resolution` half-open cells
/// `[i/n, (i+1)/n)`, indexed from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    resolution: usize,
}

impl TorusGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_measure(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn left(&self, i: usize) -> f64 {
        i as f64 / self.resolution as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.resolution as f64
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.resolution).map(move |i| self.midpoint(i))
    }

    /// Index of the cell containing `x` (after reduction mod 1).
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.resolution as f64;
        let y = wrap_unchecked(x, NODE_PERIOD) * n;
        // snap values within rounding noise of a cell edge onto that edge
        let r = y.round();
        let idx = if (y - r).abs() < 1e-9 { r } else { y.floor() };
        (idx as usize) % self.resolution
    }

    /// Length of the overlap between cell `i` and the arc `[a, b]`
    /// (`b - a` may exceed one period's worth only up to 1).
    pub fn overlap(&self, i: usize, a: f64, b: f64) -> f64 {
        debug_assert!(b >= a);
        let lo = self.left(i);
        let hi = lo + self.cell_measure();
        let start = a.floor() - 1.0;
        let mut total = 0.0;
        let mut k = start;
        while k <= b.ceil() + 1.0 {
            let l = (lo + k).max(a);
            let h = (hi + k).min(b);
            if h > l {
                total += h - l;
            }
            k += 1.0;
        }
        total
    }
}

/// A coarse grid, its `m`-fold refinement, and the parent map between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedPartition {
    pub coarse: TorusGrid,
    pub fine: TorusGrid,
    /// `parent[k]` is the coarse cell containing fine cell `k`.
    pub parent: Vec<usize>,
}

impl NestedPartition {
    pub fn block_size(&self) -> usize {
        self.fine.resolution() / self.coarse.resolution()
    }

    /// Fine cells belonging to coarse cell `i`.
    pub fn children(&self, i: usize) -> std::ops::Range<usize> {
        let m = self.block_size();
        i * m..(i + 1) * m
    }
}

pub fn nested_partition(n: usize, m: usize) -> Result<NestedPartition> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "partition sizes must be positive (n = {n}, M = {m})"
        )));
    }
    let coarse = TorusGrid::new(n)?;
    let fine = TorusGrid::new(n * m)?;
    let parent = (0..n * m).map(|k| k / m).collect();
    Ok(NestedPartition { coarse, fine, parent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(1.25, 1.0).unwrap(), 0.25);
        assert_eq!(wrap(-0.25, 1.0).unwrap(), 0.75);
        // 7 - 2π = 0.7168146928204138...
        assert!((wrap(7.0, TAU).unwrap() - 0.716_814_692_820_413_5).abs() < 1e-15);
        assert!(wrap(f64::NAN, 1.0).is_err());
        assert!(wrap(f64::INFINITY, 1.0).is_err());
        assert!(wrap(1.0, 0.0).is_err());
        assert!(wrap(-1e-20, 1.0).unwrap() < 1.0);
    }

    #[test]
    fn circle_dist_examples() {
        let a = TorusPoint::node(0.1).unwrap();
        let b = TorusPoint::node(0.9).unwrap();
        assert!((a.dist(b).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(a.dist(a).unwrap(), 0.0);
        let p = TorusPoint::phase(0.0).unwrap();
        let q = TorusPoint::phase(std::f64::consts::PI).unwrap();
        assert!((p.dist(q).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!(matches!(a.dist(p), Err(Error::PeriodMismatch(..))));
    }

    #[test]
    fn nested_partition_examples() {
        let p = nested_partition(2, 3).unwrap();
        assert_eq!(p.parent, vec![0, 0, 0, 1, 1, 1]);
        let p = nested_partition(1, 1).unwrap();
        assert_eq!(p.parent, vec![0]);
        let p = nested_partition(4, 2).unwrap();
        // fine cell 5 (one-based) is [0.5, 0.625), inside coarse cell 3 = [0.5, 0.75)
        assert_eq!(p.parent[4], 2);
        assert_eq!(p.fine.left(4), 0.5);
        assert_eq!(p.coarse.left(2), 0.5);
        assert!(nested_partition(0, 3).is_err());
        assert!(nested_partition(3, 0).is_err());
    }

    #[test]
    fn nesting_holds_exhaustively() {
        for n in 1..=40 {
            for m in 1..=40 {
                let p = nested_partition(n, m).unwrap();
                let total: f64 = (0..p.fine.len()).map(|_| p.fine.cell_measure()).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for k in 0..p.fine.len() {
                    let i = p.parent[k];
                    let (lo, hi) = (p.fine.left(k), p.fine.left(k) + p.fine.cell_measure());
                    let (clo, chi) = (p.coarse.left(i), p.coarse.left(i) + p.coarse.cell_measure());
                    assert!(lo >= clo - 1e-12 && hi <= chi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cell_lookup_and_overlap() {
        let g = TorusGrid::new(8).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.999), 7);
        assert_eq!(g.cell_of(1.0), 0);
        assert_eq!(g.cell_of(-0.01), 7);
        assert_eq!(g.cell_of(0.125 + 0.0625), 1);
        // arc crossing zero
        assert!((g.overlap(7, -0.0625, 0.0625) - 0.0625).abs() < 1e-15);
        assert!((g.overlap(0, -0.0625, 0.0625) - 0.0625).abs() < 1e-15);
        assert_eq!(g.overlap(3, -0.0625, 0.0625), 0.0);
        let total: f64 = (0..8).map(|i| g.overlap(i, 0.3, 0.55)).sum();
        assert!((total - 0.25).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn distance_is_translation_invariant(x in -5.0..5.0f64, y in -5.0..5.0f64, t in -5.0..5.0f64) {
            for period in [NODE_PERIOD, PHASE_PERIOD] {
                let d0 = circle_dist(x, y, period);
                let d1 = circle_dist(x + t, y + t, period);
                prop_assert!((d0 - d1).abs() < 1e-12);
                prop_assert!(d0 <= period / 2.0 + 1e-15);
            }
        }

        #[test]
        fn distance_is_a_metric(x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64) {
            let d = |a, b| circle_dist(a, b, 1.0);
            prop_assert!((d(x, y) - d(y, x)).abs() < 1e-15);
            prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-15);
        }
    }
}
