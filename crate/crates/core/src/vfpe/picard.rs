use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounded_lipschitz::{d_bl, paired_upper_bound};
use crate::coupling::CouplingSpec;
use crate::error::{Error, Result};
use crate::graphop::{FiberMatrix, Graphop};
use crate::measure::{MeasureFamily, PhaseMeasure, Trajectory};
use crate::metrics::fiber_integrals;
use crate::torus::TorusGrid;

use super::field::{particle_moments, FieldEvaluator};
use super::flow::rk4;

/// Gaps below this are treated as converged noise when forming ratios.
const NOISE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub t_end: f64,
    /// Requested step; shrunk so that a whole number of steps fits between stamps.
    pub dt: f64,
    /// Number of stamp intervals on `[0, T]`.
    pub stamps: usize,
    /// Defaults to `2Cb + bγ_A + 2`.
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// When set, a successive-gap ratio above `C₁/(α − C₂) + slack` is an error.
    pub contraction_slack: Option<f64>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 0.01,
            stamps: 50,
            alpha: None,
            tol: 1e-4,
            max_iter: 30,
            contraction_slack: None,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.t_end)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {}", self.dt)));
        }
        if self.stamps == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter("need at least one stamp interval and one iteration".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn stamp_times(&self) -> Vec<f64> {
        (0..=self.stamps)
            .map(|k| self.t_end * k as f64 / self.stamps as f64)
            .collect()
    }

    /// Steps per stamp interval and the resulting step size.
    pub fn substeps(&self) -> (usize, f64) {
        let interval = self.t_end / self.stamps as f64;
        let n = ((interval / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, interval / n as f64)
    }
}

/// Where the iteration starts.
#[derive(Debug, Clone, PartialEq)]
pub enum PicardStart {
    /// `κ⁰_t = μ₀` for all `t`.
    ConstantInTime,
    /// Explicit positions `[stamp][fiber][particle]`, weights taken from `μ₀`.
    Positions(Vec<Vec<Vec<f64>>>),
}

/// The iterate of the fixed-point map together with its convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub grid: TorusGrid,
    pub cap: f64,
    pub times: Vec<f64>,
    /// Fixed particle weights per fiber.
    pub weights: Vec<Vec<f64>>,
    /// `positions[k][i][p]`: particle `p` of fiber `i` at stamp `k`.
    pub positions: Vec<Vec<Vec<f64>>>,
    pub iterations: usize,
    /// `d_α(κ^{n+1}, κ^n)` per iteration.
    pub gaps: Vec<f64>,
    /// Successive gap ratios, skipping gaps at noise level.
    pub ratios: Vec<f64>,
    pub alpha: f64,
    /// The theoretical rate `2Cb / (α − bγ_A)`.
    pub rate_bound: f64,
    pub tol: f64,
}

impl SolverState {
    pub fn family(&self, k: usize) -> Result<MeasureFamily> {
        let pos = self.positions.get(k).ok_or(Error::MissingStamp(k))?;
        let fibers = pos
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| PhaseMeasure::from_wrapped(p.iter().copied().zip(w.iter().copied()).collect()))
            .collect();
        MeasureFamily::new(self.grid, self.cap, fibers)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let fams = (0..self.times.len()).map(|k| self.family(k)).collect::<Result<Vec<_>>>()?;
        Trajectory::new(self.times.clone(), fams)
    }

    pub fn converged(&self) -> bool {
        self.gaps.last().is_some_and(|g| *g <= self.tol)
    }
}

fn evaluator_for(
    matrix: &FiberMatrix,
    gamma: f64,
    coupling: &CouplingSpec,
    cap: f64,
    times: &[f64],
    weights: &[Vec<f64>],
    positions: &[Vec<Vec<f64>>],
) -> Result<FieldEvaluator> {
    let harmonics = coupling.function.harmonics();
    let masses: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
    let moments: Vec<Vec<Vec<(f64, f64)>>> = positions
        .par_iter()
        .map(|stamp| {
            stamp
                .iter()
                .zip(weights)
                .map(|(p, w)| particle_moments(&harmonics, p, w))
                .collect()
        })
        .collect();
    FieldEvaluator::from_fiber_moments(
        matrix,
        gamma,
        coupling,
        cap,
        times.to_vec(),
        &moments,
        &vec![masses; times.len()],
    )
}

/// Push `μ₀` through the flow of `field`, recording every stamp.
fn sweep(field: &FieldEvaluator, start: &[Vec<f64>], times: &[f64], sub: usize, h: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    let per_fiber: Vec<Vec<Vec<f64>>> = start
        .par_iter()
        .enumerate()
        .map(|(cell, p0)| {
            let mut p = p0.clone();
            let mut rec = Vec::with_capacity(times.len());
            rec.push(p.clone());
            for k in 0..times.len() - 1 {
                for s in 0..sub {
                    let t = times[k] + s as f64 * h;
                    for q in p.iter_mut() {
                        *q = rk4(field, cell, *q, t, h)?;
                    }
                }
                rec.push(p.clone());
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    // transpose to [stamp][fiber][particle]
    Ok((0..times.len())
        .map(|k| per_fiber.iter().map(|f| f[k].clone()).collect())
        .collect())
}

/// `max_k e^{−α t_k} d̄^{b,A}` between two iterates with paired particles.
///
/// Stamps are visited in decreasing order of a cheap paired upper bound and
/// skipped once that bound cannot beat the running maximum, so the value is exact.
pub(crate) fn paired_d_alpha(
    matrix: &FiberMatrix,
    times: &[f64],
    weights: &[Vec<f64>],
    a: &[Vec<Vec<f64>>],
    b: &[Vec<Vec<f64>>],
    alpha: f64,
) -> f64 {
    let measure = |pos: &[f64], w: &[f64]| PhaseMeasure::from_wrapped(pos.iter().copied().zip(w.iter().copied()).collect());
    let mut order: Vec<(usize, f64)> = (0..times.len())
        .map(|k| {
            let ub: Vec<f64> = (0..weights.len())
                .map(|i| {
                    paired_upper_bound(&measure(&a[k][i], &weights[i]), &measure(&b[k][i], &weights[i]))
                        .expect("same particles")
                })
                .collect();
            let top = fiber_integrals(matrix, &ub).into_iter().fold(0.0, f64::max);
            (k, (-alpha * times[k]).exp() * top)
        })
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut best = 0.0f64;
    for (k, ub) in order {
        if ub <= best {
            break;
        }
        let d: Vec<f64> = (0..weights.len())
            .into_par_iter()
            .map(|i| d_bl(&measure(&a[k][i], &weights[i]), &measure(&b[k][i], &weights[i])))
            .collect();
        let top = fiber_integrals(matrix, &d).into_iter().fold(0.0, f64::max);
        best = best.max((-alpha * times[k]).exp() * top);
    }
    best
}

/// Solve `κ_t^y = μ₀^y ∘ T_{0,t}[𝒜, κ, y]` by iterating the frozen-field map from
/// the constant-in-time start.
pub fn picard_solve(a: &Graphop, mu0: &MeasureFamily, coupling: &CouplingSpec, cfg: &PicardConfig) -> Result<SolverState> {
    picard_solve_from(a, mu0, coupling, cfg, PicardStart::ConstantInTime)
}

pub fn picard_solve_from(
    a: &Graphop,
    mu0: &MeasureFamily,
    coupling: &CouplingSpec,
    cfg: &PicardConfig,
    start: PicardStart,
) -> Result<SolverState> {
    cfg.validate()?;
    coupling.validate()?;
    let gamma = a.gamma();
    if gamma > 1.0 + 1e-12 {
        return Err(Error::GammaTooLarge(gamma));
    }
    let b = mu0.cap();
    let c = coupling.strength;
    let floor = 2.0 * c * b + b * gamma;
    let alpha = cfg.alpha.unwrap_or(floor + 2.0);
    if !(alpha > floor) {
        return Err(Error::AlphaTooSmall { alpha, bound: floor });
    }
    let rate_bound = 2.0 * c * b / (alpha - b * gamma);
    let grid = mu0.grid();
    let matrix = a.fiber_matrix(&grid);
    let times = cfg.stamp_times();
    let (sub, h) = cfg.substeps();
    let weights: Vec<Vec<f64>> = mu0.fibers().iter().map(|f| f.particles().iter().map(|p| p.1).collect()).collect();
    let initial: Vec<Vec<f64>> = mu0.fibers().iter().map(|f| f.positions().collect()).collect();
    let mut positions = match start {
        PicardStart::ConstantInTime => vec![initial.clone(); times.len()],
        PicardStart::Positions(p) => {
            let ok = p.len() == times.len()
                && p.iter().all(|s| {
                    s.len() == initial.len() && s.iter().zip(&initial).all(|(x, y)| x.len() == y.len())
                });
            if !ok {
                return Err(Error::InvalidParameter("start positions do not match the stamps or μ₀".into()));
            }
            p.into_iter()
                .map(|s| s.into_iter().map(|f| f.into_iter().map(crate::torus::wrap_phase).collect()).collect())
                .collect()
        }
    };
    let mut state = SolverState {
        grid,
        cap: b,
        times: times.clone(),
        weights: weights.clone(),
        positions: Vec::new(),
        iterations: 0,
        gaps: Vec::new(),
        ratios: Vec::new(),
        alpha,
        rate_bound,
        tol: cfg.tol,
    };
    for iter in 1..=cfg.max_iter {
        let field = evaluator_for(&matrix, gamma, coupling, b, &times, &weights, &positions)?;
        let next = sweep(&field, &initial, &times, sub, h)?;
        let gap = paired_d_alpha(&matrix, &times, &weights, &next, &positions, alpha);
        if let Some(&prev) = state.gaps.last() {
            if prev > NOISE_GAP && gap > NOISE_GAP {
                let ratio = gap / prev;
                state.ratios.push(ratio);
                if let Some(slack) = cfg.contraction_slack {
                    if ratio > rate_bound + slack {
                        return Err(Error::ContractionViolated {
                            ratio,
                            bound: rate_bound,
                        });
                    }
                }
            }
        }
        log::debug!("picard iteration {iter}: d_alpha gap {gap:.3e}");
        state.gaps.push(gap);
        state.iterations = iter;
        positions = next;
        if gap <= cfg.tol {
            state.positions = positions;
            return Ok(state);
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        gaps: state.gaps,
    })
}
