//! Summability kernels on the node circle and the graphon regularization
//! `K_n A K_n` of a graphop.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphop::{GraphonKernel, Graphop, GridFn};
use crate::torus::{circle_dist, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `k_n(x) = (n+1)^{-1} (sin((n+1)πx) / sin(πx))²`.
    Fejer,
    /// Periodized normal density with `σ_n² = 1 / (4π²(n+1))`, so that the
    /// Fourier multipliers are `exp(−j² / (2(n+1)))`.
    WrappedGaussian,
}

/// Member `k_n` of a positive symmetric summability kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummabilityKernel {
    family: KernelFamily,
    index: usize,
}

/// Grid points per unit of kernel index required by [`convolve`] and [`regularize`].
pub const POINTS_PER_INDEX: usize = 8;

pub fn fejer(n: usize) -> SummabilityKernel {
    SummabilityKernel {
        family: KernelFamily::Fejer,
        index: n,
    }
}

pub fn wrapped_gaussian(n: usize) -> SummabilityKernel {
    SummabilityKernel {
        family: KernelFamily::WrappedGaussian,
        index: n,
    }
}

impl SummabilityKernel {
    pub fn new(family: KernelFamily, index: usize) -> Self {
        Self { family, index }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Smallest grid accepted by [`convolve`] and [`regularize`].
    pub fn min_resolution(&self) -> usize {
        POINTS_PER_INDEX * (self.index + 1)
    }

    /// The odd grid `8(n+1) + 1`; odd resolutions place a midpoint at `x = 1/2`.
    pub fn default_resolution(&self) -> usize {
        self.min_resolution() + 1
    }

    fn sigma(&self) -> f64 {
        1.0 / (TAU * ((self.index + 1) as f64).sqrt())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.family {
            KernelFamily::Fejer => {
                let m = (self.index + 1) as f64;
                let s = (PI * x).sin();
                if s.abs() < 1e-6 {
                    // near the removable singularity the Fourier series is stable
                    self.fejer_series(x)
                } else {
                    let r = (m * PI * x).sin() / s;
                    r * r / m
                }
            }
            KernelFamily::WrappedGaussian => {
                let s = self.sigma();
                let d = circle_dist(x, 0.0, 1.0);
                let norm = 1.0 / (s * TAU.sqrt());
                (-6..=6)
                    .map(|k| {
                        let y = d + k as f64;
                        norm * (-(y * y) / (2.0 * s * s)).exp()
                    })
                    .sum()
            }
        }
    }

    fn fejer_series(&self, x: f64) -> f64 {
        1.0 + 2.0
            * (1..=self.index)
                .map(|j| self.multiplier(j as i64) * (TAU * j as f64 * x).cos())
                .sum::<f64>()
    }

    /// Fourier coefficient `k̂_n(j)`, i.e. the convolution multiplier on `e^{2πijx}`.
    pub fn multiplier(&self, j: i64) -> f64 {
        let j = j.unsigned_abs() as f64;
        let m = (self.index + 1) as f64;
        match self.family {
            KernelFamily::Fejer => (1.0 - j / m).max(0.0),
            KernelFamily::WrappedGaussian => (-(j * j) / (2.0 * m)).exp(),
        }
    }

    /// `∫_{dist(x,0) > δ} k_n dm`, by composite midpoint quadrature.
    pub fn tail_mass(&self, delta: f64) -> f64 {
        let pts = 1 << 16;
        let h = 1.0 / pts as f64;
        (0..pts)
            .map(|i| (i as f64 + 0.5) * h)
            .filter(|&x| circle_dist(x, 0.0, 1.0) > delta)
            .map(|x| self.eval(x) * h)
            .sum()
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if grid.len() < self.min_resolution() {
            return Err(Error::UnderResolved {
                index: self.index,
                required: self.min_resolution(),
                actual: grid.len(),
            });
        }
        Ok(())
    }

    /// `k(d/N)` for `d = 0..N`.
    fn circulant(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.len()).map(|d| self.eval(grid.left(d))).collect()
    }
}

/// `(K_n f)(x_i) = ∫ k_n(x_i − y) f(y) dy`, midpoint rule on `f`'s grid.
pub fn convolve(k: &SummabilityKernel, f: &GridFn) -> Result<GridFn> {
    let grid = f.grid();
    k.check_grid(&grid)?;
    let n = grid.len();
    let kv = k.circulant(&grid);
    let h = grid.cell_measure();
    let fv = f.values();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| kv[(i + n - j) % n] * fv[j])
                .sum::<f64>()
                * h
        })
        .collect();
    GridFn::new(grid, values)
}

/// The graphon `K_n A K_n` with kernel
/// `W^n(x, z) = ∫∫ k_n(x − y) k_n(z − ẑ) dν(y, ẑ)` sampled on `grid`.
pub fn regularize(a: &Graphop, k: &SummabilityKernel, grid: &TorusGrid) -> Result<Graphop> {
    k.check_grid(grid)?;
    let n = grid.len();
    let kv = k.circulant(grid);
    let h = grid.cell_measure();

    // inner[y][b] = ∫ k(z_b − ẑ) dν_y(ẑ)
    let inner: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|y| {
            let fib = a.fiber(grid.midpoint(y), grid);
            (0..n)
                .map(|b| {
                    let z = grid.midpoint(b);
                    let atoms: f64 = fib.atoms.iter().map(|&(loc, w)| w * k.eval(z - loc)).sum();
                    let dens: f64 = fib.cells.iter().map(|&(c, m)| m * kv[(b + n - c) % n]).sum();
                    atoms + dens
                })
                .collect()
        })
        .collect();

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mut row = vec![0.0; n];
            for (y, iy) in inner.iter().enumerate() {
                let kxy = kv[(x + n - y) % n] * h;
                if kxy == 0.0 {
                    continue;
                }
                for (r, v) in row.iter_mut().zip(iy) {
                    *r += kxy * v;
                }
            }
            row
        })
        .collect();
    Ok(Graphop::graphon(GraphonKernel::from_matrix(*grid, values)?))
}

/// Continuous test functions `{1, cos(2πjx), sin(2πjx) : 1 ≤ j ≤ max_mode}`.
pub fn default_test_functions(max_mode: usize) -> Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let mut out: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = vec![Box::new(|_| 1.0)];
    for j in 1..=max_mode {
        let w = TAU * j as f64;
        out.push(Box::new(move |x| (w * x).cos()));
        out.push(Box::new(move |x| (w * x).sin()));
    }
    out
}

/// `max_f ‖A_reg f − A f‖_∞` over the grid midpoints: a finite surrogate for
/// o-convergence `A_reg f → A f`.
pub fn o_convergence_gap(
    a: &Graphop,
    a_reg: &Graphop,
    test_fns: &[Box<dyn Fn(f64) -> f64 + Send + Sync>],
    grid: &TorusGrid,
) -> Result<f64> {
    if test_fns.is_empty() {
        return Err(Error::InvalidParameter("no test functions".into()));
    }
    let mut gap: f64 = 0.0;
    for f in test_fns {
        let lhs = a_reg.apply_fn(grid, f.as_ref());
        let rhs = a.apply_fn(grid, f.as_ref());
        gap = gap.max(lhs.sub(&rhs)?.sup_norm());
    }
    Ok(gap)
}
