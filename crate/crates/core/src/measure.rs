//! Finite measures on the phase circle as weighted particles, families of
//! them indexed by node cells, and the extended graphop acting on families.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphop::{FiberMatrix, Graphop};
use crate::torus::{wrap_phase, TorusGrid};

/// Relative slack allowed when comparing fiber masses against the cap.
const CAP_SLACK: f64 = 1e-12;

/// A finite measure on `[0, 2π)` made of weighted atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseMeasure {
    particles: Vec<(f64, f64)>,
}

impl PhaseMeasure {
    /// Positions are reduced modulo `2π`; weights must be finite and nonnegative.
    pub fn new(particles: Vec<(f64, f64)>) -> Result<Self> {
        let mut out = Vec::with_capacity(particles.len());
        for (p, w) in particles {
            if !p.is_finite() {
                return Err(Error::NonFinite(p));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "particle weights must be finite and nonnegative, got {w}"
                )));
            }
            out.push((wrap_phase(p), w));
        }
        Ok(Self { particles: out })
    }

    pub(crate) fn from_wrapped(particles: Vec<(f64, f64)>) -> Self {
        Self { particles }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(position: f64, weight: f64) -> Result<Self> {
        Self::new(vec![(position, weight)])
    }

    /// Atoms of weight `total / len` at the given positions.
    pub fn equal_weights(positions: &[f64], total: f64) -> Result<Self> {
        if positions.is_empty() {
            return Ok(Self::zero());
        }
        let w = total / positions.len() as f64;
        Self::new(positions.iter().map(|&p| (p, w)).collect())
    }

    pub fn particles(&self) -> &[(f64, f64)] {
        &self.particles
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.particles.iter().map(|p| p.1).sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.particles.iter().map(|&(p, w)| w * f(p)).sum()
    }

    /// `(∫ sin(hu) dμ, ∫ cos(hu) dμ)`.
    pub fn moment(&self, h: f64) -> (f64, f64) {
        self.particles.iter().fold((0.0, 0.0), |(s, c), &(p, w)| {
            let (sn, cs) = (h * p).sin_cos();
            (s + w * sn, c + w * cs)
        })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.particles.iter().map(|&(p, w)| (p, c * w)).collect())
    }
}

/// Piecewise-constant-in-`x` family `x ↦ μ^x`, one fiber per grid cell,
/// with all fiber masses bounded by the cap `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    grid: TorusGrid,
    cap: f64,
    fibers: Vec<PhaseMeasure>,
}

impl MeasureFamily {
    pub fn new(grid: TorusGrid, cap: f64, fibers: Vec<PhaseMeasure>) -> Result<Self> {
        if fibers.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                actual: fibers.len(),
            });
        }
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass cap must be positive, got {cap}")));
        }
        for (i, f) in fibers.iter().enumerate() {
            let m = f.mass();
            if m > cap * (1.0 + CAP_SLACK) + CAP_SLACK {
                return Err(Error::InvalidParameter(format!(
                    "fiber {i} has mass {m} above the cap {cap}"
                )));
            }
        }
        Ok(Self { grid, cap, fibers })
    }

    /// Every fiber equal to `fiber`.
    pub fn constant(grid: TorusGrid, cap: f64, fiber: PhaseMeasure) -> Result<Self> {
        Self::new(grid, cap, vec![fiber; grid.len()])
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn fibers(&self) -> &[PhaseMeasure] {
        &self.fibers
    }

    pub fn fiber(&self, i: usize) -> &PhaseMeasure {
        &self.fibers[i]
    }

    pub fn into_fibers(self) -> Vec<PhaseMeasure> {
        self.fibers
    }

    pub fn max_mass(&self) -> f64 {
        self.fibers.iter().map(|f| f.mass()).fold(0.0, f64::max)
    }

    pub(crate) fn check_same_grid(&self, other: &MeasureFamily) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                actual: other.grid.len(),
            });
        }
        Ok(())
    }
}

/// `(𝒜μ)^x = ∫ μ^y dν_x(y)` on the family's own grid.
pub fn extended_apply(a: &Graphop, mu: &MeasureFamily) -> Result<MeasureFamily> {
    let grid = mu.grid();
    extended_apply_with(&a.fiber_matrix(&grid), a.gamma(), mu)
}

/// [`extended_apply`] with a precomputed fiber matrix and degree bound `gamma`.
pub fn extended_apply_with(
    matrix: &FiberMatrix,
    gamma: f64,
    mu: &MeasureFamily,
) -> Result<MeasureFamily> {
    if matrix.grid() != mu.grid() {
        return Err(Error::GridMismatch {
            expected: matrix.grid().len(),
            actual: mu.grid().len(),
        });
    }
    let fibers = matrix
        .rows()
        .par_iter()
        .map(|row| {
            let mut parts = Vec::new();
            for &(j, m) in row {
                parts.extend(mu.fibers[j].particles.iter().map(|&(p, w)| (p, m * w)));
            }
            PhaseMeasure::from_wrapped(parts)
        })
        .collect();
    let cap = mu.cap() * gamma.max(f64::MIN_POSITIVE);
    MeasureFamily::new(mu.grid(), cap, fibers)
}

/// A time-indexed sequence of families sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    families: Vec<MeasureFamily>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, families: Vec<MeasureFamily>) -> Result<Self> {
        if times.len() != families.len() || times.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "trajectory needs one family per stamp ({} stamps, {} families)",
                times.len(),
                families.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("time stamps must increase".into()));
        }
        for f in &families[1..] {
            families[0].check_same_grid(f)?;
        }
        Ok(Self { times, families })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn families(&self) -> &[MeasureFamily] {
        &self.families
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> TorusGrid {
        self.families[0].grid()
    }

    pub fn last(&self) -> &MeasureFamily {
        self.families.last().expect("trajectory is nonempty")
    }

    /// Errors unless both trajectories carry the same stamps (to 1e-12).
    pub fn check_stamps(&self, other: &Trajectory) -> Result<()> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::StampMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn positions_are_wrapped_and_weights_checked() {
        let m = PhaseMeasure::new(vec![(TAU + 0.5, 1.0), (-0.5, 0.5)]).unwrap();
        assert!((m.particles()[0].0 - 0.5).abs() < 1e-12);
        assert!((m.particles()[1].0 - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(m.mass(), 1.5);
        assert!(PhaseMeasure::new(vec![(0.0, -1.0)]).is_err());
        assert!(PhaseMeasure::new(vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn family_enforces_cap_and_grid() {
        let g = TorusGrid::new(2).unwrap();
        let heavy = PhaseMeasure::dirac(0.0, 2.0).unwrap();
        assert!(MeasureFamily::new(g, 1.0, vec![heavy.clone(), heavy.clone()]).is_err());
        assert!(MeasureFamily::new(g, 2.0, vec![heavy.clone()]).is_err());
        assert!(MeasureFamily::new(g, 2.0, vec![heavy.clone(), heavy]).is_ok());
    }

    #[test]
    fn shift_mixes_the_two_neighbours() {
        // fiber y carries δ_{g(y)} with g(y) = 2πy
        let grid = TorusGrid::new(8).unwrap();
        let fibers = grid
            .midpoints()
            .map(|y| PhaseMeasure::dirac(TAU * y, 1.0).unwrap())
            .collect();
        let mu = MeasureFamily::new(grid, 1.0, fibers).unwrap();
        let a = Graphop::atomic_shift(0.25).unwrap();
        let out = extended_apply(&a, &mu).unwrap();
        for (i, x) in grid.midpoints().enumerate() {
            let mut got: Vec<(f64, f64)> = out.fiber(i).particles().to_vec();
            got.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut want = vec![
                (wrap_phase(TAU * (x + 0.25)), 0.5),
                (wrap_phase(TAU * (x - 0.25)), 0.5),
            ];
            want.sort_by(|p, q| p.0.total_cmp(&q.0));
            for (g, w) in got.iter().zip(&want) {
                assert!((g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn averaging_identical_fibers_returns_them() {
        let grid = TorusGrid::new(6).unwrap();
        let mu0 = PhaseMeasure::new(vec![(0.3, 0.25), (PI, 0.75)]).unwrap();
        let mu = MeasureFamily::constant(grid, 1.0, mu0.clone()).unwrap();
        let out = extended_apply(&Graphop::constant(1.0).unwrap(), &mu).unwrap();
        for f in out.fibers() {
            assert!((f.mass() - 1.0).abs() < 1e-12);
            assert!((f.integrate(|u| u.cos()) - mu0.integrate(|u| u.cos())).abs() < 1e-12);
            assert!((f.integrate(|u| u.sin()) - mu0.integrate(|u| u.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn markov_graphop_preserves_unit_mass() {
        let grid = TorusGrid::new(16).unwrap();
        let fibers = (0..16)
            .map(|i| PhaseMeasure::equal_weights(&[0.1 * i as f64, 1.0, 4.0], 1.0).unwrap())
            .collect();
        let mu = MeasureFamily::new(grid, 1.0, fibers).unwrap();
        for a in [
            Graphop::atomic_shift(0.125).unwrap(),
            Graphop::arc_band(0.0, 0.1, 5.0).unwrap(),
            Graphop::constant(1.0).unwrap(),
        ] {
            let out = extended_apply(&a, &mu).unwrap();
            for f in out.fibers() {
                assert!((f.mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_stamps_are_checked() {
        let grid = TorusGrid::new(1).unwrap();
        let fam = MeasureFamily::constant(grid, 1.0, PhaseMeasure::zero()).unwrap();
        let a = Trajectory::new(vec![0.0, 1.0], vec![fam.clone(), fam.clone()]).unwrap();
        let b = Trajectory::new(vec![0.0, 0.5], vec![fam.clone(), fam.clone()]).unwrap();
        assert_eq!(a.check_stamps(&b), Err(Error::StampMismatch));
        assert!(Trajectory::new(vec![1.0, 0.0], vec![fam.clone(), fam]).is_err());
    }
}
