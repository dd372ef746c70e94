//! Distances between measure families: the fiber integral `d̄^{b,A,x}`, its
//! supremum `d̄^{b,A}`, the node average `d̄^{b,m}`, and the time metric `d_α`.

use rayon::prelude::*;

use crate::bounded_lipschitz::d_bl;
use crate::error::{Error, Result};
use crate::graphop::{FiberMatrix, Graphop};
use crate::measure::{MeasureFamily, Trajectory};

/// `d_BL(μ^y, κ^y)` for every cell `y`.
pub fn fiber_distances(mu: &MeasureFamily, ka: &MeasureFamily) -> Result<Vec<f64>> {
    mu.check_same_grid(ka)?;
    Ok(mu
        .fibers()
        .par_iter()
        .zip(ka.fibers().par_iter())
        .map(|(a, b)| d_bl(a, b))
        .collect())
}

/// `∫ d_BL(μ^y, κ^y) dν_x(y)` for every cell `x`, from precomputed fiber distances.
pub fn fiber_integrals(matrix: &FiberMatrix, dists: &[f64]) -> Vec<f64> {
    matrix.apply(dists)
}

/// `d̄^{b,A,x}(μ, κ)` at cell `x`.
pub fn d_fiber(a: &Graphop, mu: &MeasureFamily, ka: &MeasureFamily, x: usize) -> Result<f64> {
    let grid = mu.grid();
    if x >= grid.len() {
        return Err(Error::InvalidParameter(format!("cell {x} outside a grid of {}", grid.len())));
    }
    let dists = fiber_distances(mu, ka)?;
    let row = a.fiber(grid.midpoint(x), &grid).to_cells(&grid);
    Ok(row.iter().map(|&(j, m)| m * dists[j]).sum())
}

/// `d̄^{b,A}(μ, κ) = max_x d̄^{b,A,x}(μ, κ)`.
pub fn d_bar_a(a: &Graphop, mu: &MeasureFamily, ka: &MeasureFamily) -> Result<f64> {
    let dists = fiber_distances(mu, ka)?;
    Ok(max_of(&fiber_integrals(&a.fiber_matrix(&mu.grid()), &dists)))
}

/// `d̄^{b,m}(μ, κ) = ∫ d_BL(μ^y, κ^y) dm(y)`.
pub fn d_bm(mu: &MeasureFamily, ka: &MeasureFamily) -> Result<f64> {
    let dists = fiber_distances(mu, ka)?;
    Ok(dists.iter().sum::<f64>() * mu.grid().cell_measure())
}

/// `d̄^{b,m}` at every common stamp.
pub fn d_bm_series(mu: &Trajectory, ka: &Trajectory) -> Result<Vec<f64>> {
    mu.check_stamps(ka)?;
    mu.families()
        .iter()
        .zip(ka.families())
        .map(|(a, b)| d_bm(a, b))
        .collect()
}

/// `sup_t d̄^{b,m}` over the stored stamps.
pub fn sup_d_bm(mu: &Trajectory, ka: &Trajectory) -> Result<f64> {
    Ok(max_of(&d_bm_series(mu, ka)?))
}

/// `d_α = max_t e^{−αt} d̄^{b,A}(μ_t, κ_t)` over the stored stamps.
pub fn d_alpha(mu: &Trajectory, ka: &Trajectory, a: &Graphop, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    mu.check_stamps(ka)?;
    let matrix = a.fiber_matrix(&mu.grid());
    let mut best = 0.0f64;
    for ((t, x), y) in mu.times().iter().zip(mu.families()).zip(ka.families()) {
        let d = max_of(&fiber_integrals(&matrix, &fiber_distances(x, y)?));
        best = best.max((-alpha * t).exp() * d);
    }
    Ok(best)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}
