use std::f64::consts::TAU;

use crate::coupling::{CouplingFunction, CouplingSpec};
use crate::error::{Error, Result};
use crate::graphop::{FiberMatrix, Graphop};
use crate::measure::{extended_apply, MeasureFamily, Trajectory};
use crate::torus::TorusGrid;

/// Relative slack on the field bound `C‖D‖∞ b γ_A`.
const BOUND_SLACK: f64 = 1e-12;

/// Harmonic moments `(Σ w sin(h p), Σ w cos(h p))` of one fiber, one entry per harmonic.
pub(crate) fn particle_moments(harmonics: &[(f64, f64)], positions: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    harmonics
        .iter()
        .map(|&(h, _)| {
            positions.iter().zip(weights).fold((0.0, 0.0), |(s, c), (&p, &w)| {
                let (sn, cs) = (h * p).sin_cos();
                (s + w * sn, c + w * cs)
            })
        })
        .collect()
}

/// Moments of a step density with values `rho` on equal phase cells.
pub(crate) fn density_moments(harmonics: &[(f64, f64)], rho: &[f64]) -> Vec<(f64, f64)> {
    let du = TAU / rho.len() as f64;
    harmonics
        .iter()
        .map(|&(h, _)| {
            let mut s = 0.0;
            let mut c = 0.0;
            let (mut sa, mut ca) = (0.0f64, 1.0f64);
            for (k, &r) in rho.iter().enumerate() {
                let (sb, cb) = (h * (k + 1) as f64 * du).sin_cos();
                s += r * (ca - cb) / h;
                c += r * (sb - sa) / h;
                sa = sb;
                ca = cb;
            }
            (s, c)
        })
        .collect()
}

/// The characteristic field `V(t, u, x) = C ∫ D(ũ − u) d(𝒜μ_t)^x(ũ)` on a
/// stamp grid, linearly interpolated in `t` between stamps.
///
/// Only the harmonic moments of `(𝒜μ_t)^x` are cached, which is exact for the
/// trigonometric coupling functions.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    grid: TorusGrid,
    strength: f64,
    harmonics: Vec<(f64, f64)>,
    times: Vec<f64>,
    /// `moments[k][i * H + h]` at stamp `k`, cell `i`, harmonic `h`.
    moments: Vec<Vec<(f64, f64)>>,
    /// `(𝒜μ_{t_k})^x(𝕋)` per stamp and cell.
    masses: Vec<Vec<f64>>,
    bound: f64,
}

impl FieldEvaluator {
    /// Build from per-stamp, per-fiber moments of `μ_t` (before applying the graphop).
    pub(crate) fn from_fiber_moments(
        matrix: &FiberMatrix,
        gamma: f64,
        coupling: &CouplingSpec,
        cap: f64,
        times: Vec<f64>,
        fiber_moments: &[Vec<Vec<(f64, f64)>>],
        fiber_masses: &[Vec<f64>],
    ) -> Result<Self> {
        coupling.validate()?;
        if times.is_empty() || times.len() != fiber_moments.len() || times.len() != fiber_masses.len() {
            return Err(Error::InvalidParameter("one set of moments per stamp is required".into()));
        }
        let grid = matrix.grid();
        let harmonics = coupling.function.harmonics();
        let hn = harmonics.len();
        let mass_bound = cap * gamma;
        let mut moments = Vec::with_capacity(times.len());
        let mut masses = Vec::with_capacity(times.len());
        for (fm, fmass) in fiber_moments.iter().zip(fiber_masses) {
            if fm.len() != grid.len() || fmass.len() != grid.len() {
                return Err(Error::GridMismatch {
                    expected: grid.len(),
                    actual: fm.len(),
                });
            }
            let mut applied = vec![(0.0, 0.0); grid.len() * hn];
            let mut mass = vec![0.0; grid.len()];
            for (i, row) in matrix.rows().iter().enumerate() {
                for &(j, w) in row {
                    mass[i] += w * fmass[j];
                    for h in 0..hn {
                        applied[i * hn + h].0 += w * fm[j][h].0;
                        applied[i * hn + h].1 += w * fm[j][h].1;
                    }
                }
            }
            // |V| <= C ‖D‖∞ (𝒜μ)^x(𝕋) <= C ‖D‖∞ b γ_A
            if let Some((i, m)) = mass
                .iter()
                .enumerate()
                .find(|(_, m)| **m > mass_bound * (1.0 + BOUND_SLACK) + BOUND_SLACK)
            {
                return Err(Error::Numerical {
                    time: times[moments.len()],
                    reason: format!("(𝒜μ)^x mass {m} at cell {i} exceeds b·γ = {mass_bound}"),
                });
            }
            moments.push(applied);
            masses.push(mass);
        }
        Ok(Self {
            grid,
            strength: coupling.strength,
            harmonics,
            times,
            moments,
            masses,
            bound: coupling.strength * coupling.function.sup_norm() * mass_bound,
        })
    }

    /// Cache `(𝒜μ_t)^x` for every stamp of a trajectory.
    pub fn from_trajectory(a: &Graphop, coupling: &CouplingSpec, traj: &Trajectory) -> Result<Self> {
        let harmonics = coupling.function.harmonics();
        let mut fm = Vec::with_capacity(traj.len());
        let mut fmass = Vec::with_capacity(traj.len());
        for fam in traj.families() {
            fm.push(
                fam.fibers()
                    .iter()
                    .map(|f| {
                        let (p, w): (Vec<f64>, Vec<f64>) = f.particles().iter().copied().unzip();
                        particle_moments(&harmonics, &p, &w)
                    })
                    .collect(),
            );
            fmass.push(fam.fibers().iter().map(|f| f.mass()).collect());
        }
        let cap = traj.families().iter().map(|f| f.cap()).fold(0.0, f64::max);
        Self::from_fiber_moments(
            &a.fiber_matrix(&traj.grid()),
            a.gamma(),
            coupling,
            cap,
            traj.times().to_vec(),
            &fm,
            &fmass,
        )
    }

    /// A single-stamp evaluator for a family.
    pub fn from_family(a: &Graphop, coupling: &CouplingSpec, mu: &MeasureFamily) -> Result<Self> {
        Self::from_trajectory(a, coupling, &Trajectory::new(vec![0.0], vec![mu.clone()])?)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `C ‖D‖∞ b γ_A`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `(𝒜μ_{t_k})^x(𝕋)` at stamp `k`.
    pub fn masses(&self, k: usize) -> Result<&[f64]> {
        self.masses.get(k).map(|m| m.as_slice()).ok_or(Error::MissingStamp(k))
    }

    fn eval_moments(&self, mom: &[(f64, f64)], u: f64) -> f64 {
        let mut v = 0.0;
        for (&(h, a), &(s, c)) in self.harmonics.iter().zip(mom) {
            let (sn, cs) = (h * u).sin_cos();
            v += a * (s * cs - c * sn);
        }
        self.strength * v
    }

    fn checked(&self, v: f64, t: f64, u: f64, cell: usize) -> Result<f64> {
        if !(v.abs() <= self.bound * (1.0 + BOUND_SLACK) + BOUND_SLACK) {
            return Err(Error::Numerical {
                time: t,
                reason: format!("|V({u}, cell {cell})| = {} exceeds the bound {}", v.abs(), self.bound),
            });
        }
        Ok(v)
    }

    /// `V` at stamp `k` exactly.
    pub fn at_stamp(&self, k: usize, u: f64, cell: usize) -> Result<f64> {
        let hn = self.harmonics.len();
        let mom = self.moments.get(k).ok_or(Error::MissingStamp(k))?;
        let v = self.eval_moments(&mom[cell * hn..(cell + 1) * hn], u);
        self.checked(v, self.times[k], u, cell)
    }

    /// `V(t, u, x_cell)`, linear in `t` between the bracketing stamps.
    pub fn field(&self, t: f64, u: f64, cell: usize) -> Result<f64> {
        let n = self.times.len();
        // a single stamp is a time-independent field
        if n == 1 {
            return self.at_stamp(0, u, cell);
        }
        let eps = 1e-9 * self.times[n - 1].abs().max(1.0);
        if t < self.times[0] - eps || t > self.times[n - 1] + eps {
            return Err(Error::MissingStamp(if t < self.times[0] { 0 } else { n }));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let theta = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
        let hn = self.harmonics.len();
        let (m0, m1) = (
            &self.moments[k][cell * hn..(cell + 1) * hn],
            &self.moments[k + 1][cell * hn..(cell + 1) * hn],
        );
        let mut v = 0.0;
        for (h_idx, &(h, a)) in self.harmonics.iter().enumerate() {
            let s = (1.0 - theta) * m0[h_idx].0 + theta * m1[h_idx].0;
            let c = (1.0 - theta) * m0[h_idx].1 + theta * m1[h_idx].1;
            let (sn, cs) = (h * u).sin_cos();
            v += a * (s * cs - c * sn);
        }
        self.checked(self.strength * v, t, u, cell)
    }
}

/// `V[𝒜, μ, x](u)` evaluated by summing over the particles of `(𝒜μ)^x` directly.
pub fn field_direct(
    a: &Graphop,
    coupling: &CouplingSpec,
    mu: &MeasureFamily,
    u: f64,
    cell: usize,
) -> Result<f64> {
    let amu = extended_apply(a, mu)?;
    Ok(coupling.strength * direct_sum(&coupling.function, amu.fiber(cell).particles(), u))
}

fn direct_sum(d: &CouplingFunction, particles: &[(f64, f64)], u: f64) -> f64 {
    particles.iter().map(|&(p, w)| w * d.eval(p - u)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingFunction;
    use crate::measure::PhaseMeasure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine() -> CouplingSpec {
        CouplingSpec::sine(1.0).unwrap()
    }

    #[test]
    fn uniform_particles_give_no_field() {
        let grid = TorusGrid::new(4).unwrap();
        let pos: Vec<f64> = (0..64).map(|k| TAU * (k as f64 + 0.5) / 64.0).collect();
        let mu = MeasureFamily::constant(grid, 1.0, PhaseMeasure::equal_weights(&pos, 1.0).unwrap()).unwrap();
        let ev = FieldEvaluator::from_family(&Graphop::atomic_shift(0.25).unwrap(), &sine(), &mu).unwrap();
        for cell in 0..4 {
            for k in 0..20 {
                assert!(ev.field(0.0, 0.3 * k as f64, cell).unwrap().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_atom_field() {
        let grid = TorusGrid::new(1).unwrap();
        let mu = MeasureFamily::constant(grid, 1.0, PhaseMeasure::dirac(PI, 1.0).unwrap()).unwrap();
        let ev = FieldEvaluator::from_family(&Graphop::constant(1.0).unwrap(), &sine(), &mu).unwrap();
        for k in 0..50 {
            let u = 0.13 * k as f64;
            assert!((ev.field(0.0, u, 0).unwrap() - u.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_measure_gives_zero_field() {
        let grid = TorusGrid::new(3).unwrap();
        let mu = MeasureFamily::constant(grid, 1.0, PhaseMeasure::zero()).unwrap();
        let ev = FieldEvaluator::from_family(&Graphop::constant(1.0).unwrap(), &sine(), &mu).unwrap();
        assert_eq!(ev.field(0.0, 1.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn moments_agree_with_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = TorusGrid::new(8).unwrap();
        let coupling = CouplingSpec::new(CouplingFunction::SineSecondHarmonic { beta: -0.6 }, 1.5).unwrap();
        let fibers = (0..8)
            .map(|_| {
                PhaseMeasure::equal_weights(&(0..10).map(|_| rng.gen_range(0.0..TAU)).collect::<Vec<_>>(), 0.9)
                    .unwrap()
            })
            .collect();
        let mu = MeasureFamily::new(grid, 1.0, fibers).unwrap();
        let a = Graphop::mixture(vec![
            (0.5, Graphop::atomic_shift(0.125).unwrap()),
            (0.5, Graphop::arc_band(0.0, 0.2, 2.5).unwrap()),
        ])
        .unwrap();
        let ev = FieldEvaluator::from_family(&a, &coupling, &mu).unwrap();
        for cell in 0..8 {
            for k in 0..16 {
                let u = 0.4 * k as f64;
                let fast = ev.field(0.0, u, cell).unwrap();
                let slow = field_direct(&a, &coupling, &mu, u, cell).unwrap();
                assert!((fast - slow).abs() < 1e-12);
                assert!(fast.abs() <= ev.bound());
            }
        }
    }

    #[test]
    fn interpolates_linearly_between_stamps() {
        let grid = TorusGrid::new(1).unwrap();
        let f0 = MeasureFamily::constant(grid, 1.0, PhaseMeasure::dirac(PI / 2.0, 1.0).unwrap()).unwrap();
        let f1 = MeasureFamily::constant(grid, 1.0, PhaseMeasure::dirac(PI, 1.0).unwrap()).unwrap();
        let traj = Trajectory::new(vec![0.0, 1.0], vec![f0, f1]).unwrap();
        let ev = FieldEvaluator::from_trajectory(&Graphop::constant(1.0).unwrap(), &sine(), &traj).unwrap();
        let u = 0.2;
        let want = 0.75 * (PI / 2.0 - u).sin() + 0.25 * (PI - u).sin();
        assert!((ev.field(0.25, u, 0).unwrap() - want).abs() < 1e-14);
        assert_eq!(ev.field(1.5, u, 0), Err(Error::MissingStamp(2)));
        assert_eq!(ev.at_stamp(3, u, 0), Err(Error::MissingStamp(3)));
    }

    #[test]
    fn step_density_moments_are_exact() {
        let h = [(1.0, 1.0), (2.0, 0.5)];
        // indicator of [0, π) with density 1/π
        let rho: Vec<f64> = (0..64).map(|k| if k < 32 { 1.0 / PI } else { 0.0 }).collect();
        let m = density_moments(&h, &rho);
        assert!((m[0].0 - 2.0 / PI).abs() < 1e-14);
        assert!(m[0].1.abs() < 1e-14);
        assert!(m[1].0.abs() < 1e-14 && m[1].1.abs() < 1e-14);
    }
}
