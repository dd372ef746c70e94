use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingSpec;
use crate::density::InitialDensity;
use crate::error::{Error, Result};
use crate::graphop::Graphop;
use crate::measure::{MeasureFamily, PhaseMeasure, Trajectory};
use crate::torus::TorusGrid;

use super::field::density_moments;

/// Largest admissible Courant number `|V| dt / du`.
pub const MAX_CFL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FvConfig {
    pub t_end: f64,
    /// Requested step; shrunk so that a whole number of steps fits between stamps.
    pub dt: f64,
    pub stamps: usize,
    pub u_resolution: usize,
}

impl Default for FvConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 0.005,
            stamps: 50,
            u_resolution: 256,
        }
    }
}

/// Cell-average densities `densities[k][i][j]` at stamp `k`, node cell `i`, phase cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FvSolution {
    pub grid: TorusGrid,
    pub times: Vec<f64>,
    pub u_resolution: usize,
    pub densities: Vec<Vec<Vec<f64>>>,
    /// Largest per-step change of any fiber mass.
    pub max_mass_drift: f64,
    /// Largest Courant number met.
    pub max_cfl: f64,
}

impl FvSolution {
    pub fn du(&self) -> f64 {
        TAU / self.u_resolution as f64
    }

    /// Stamp `k` as atoms of mass `ρ du` at the phase-cell midpoints.
    pub fn family(&self, k: usize) -> Result<MeasureFamily> {
        let du = self.du();
        let dens = self.densities.get(k).ok_or(Error::MissingStamp(k))?;
        let fibers = dens
            .iter()
            .map(|rho| {
                PhaseMeasure::new(rho.iter().enumerate().map(|(j, &r)| ((j as f64 + 0.5) * du, r * du)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let cap = fibers.iter().map(|f| f.mass()).fold(1.0, f64::max);
        MeasureFamily::new(self.grid, cap, fibers)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let fams = (0..self.times.len()).map(|k| self.family(k)).collect::<Result<Vec<_>>>()?;
        Trajectory::new(self.times.clone(), fams)
    }

    pub fn mass(&self, k: usize, cell: usize) -> f64 {
        self.densities[k][cell].iter().sum::<f64>() * self.du()
    }
}

/// First-order upwind finite volumes for `∂_t ρ + ∂_u(ρ V[𝒜ρ]) = 0` on every fiber,
/// explicit Euler in time, field recomputed from the current density each step.
pub fn fv_transport_solve(
    a: &Graphop,
    rho0: &InitialDensity,
    grid: TorusGrid,
    coupling: &CouplingSpec,
    cfg: &FvConfig,
) -> Result<FvSolution> {
    coupling.validate()?;
    if cfg.u_resolution < 2 || cfg.stamps == 0 || !(cfg.t_end > 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("bad finite-volume configuration".into()));
    }
    let l = cfg.u_resolution;
    let du = TAU / l as f64;
    let profiles = rho0.check_normalized(&grid, l)?;
    let mut rho: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| p.masses().iter().map(|m| m / du).collect())
        .collect();
    let matrix = a.fiber_matrix(&grid);
    let harmonics = coupling.function.harmonics();
    let bound = coupling.strength * coupling.function.sup_norm() * a.gamma() * rho.iter().map(|r| r.iter().sum::<f64>() * du).fold(0.0, f64::max);

    let interval = cfg.t_end / cfg.stamps as f64;
    let sub = ((interval / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = interval / sub as f64;
    let lambda = dt / du;
    let faces: Vec<(f64, f64)> = (0..l).map(|k| ((k + 1) as f64 * du).sin_cos()).collect();

    let times: Vec<f64> = (0..=cfg.stamps).map(|k| k as f64 * interval).collect();
    let mut out = vec![rho.clone()];
    let mut max_drift = 0.0f64;
    let mut max_cfl = 0.0f64;
    for k in 0..cfg.stamps {
        for s in 0..sub {
            let t = times[k] + s as f64 * dt;
            let fm: Vec<Vec<(f64, f64)>> = rho.par_iter().map(|r| density_moments(&harmonics, r)).collect();
            let hn = harmonics.len();
            let applied: Vec<Vec<(f64, f64)>> = matrix
                .rows()
                .iter()
                .map(|row| {
                    let mut acc = vec![(0.0, 0.0); hn];
                    for &(j, w) in row {
                        for h in 0..hn {
                            acc[h].0 += w * fm[j][h].0;
                            acc[h].1 += w * fm[j][h].1;
                        }
                    }
                    acc
                })
                .collect();
            let step: Vec<Result<(Vec<f64>, f64, f64)>> = rho
                .par_iter()
                .zip(applied.par_iter())
                .enumerate()
                .map(|(cell, (r, mom))| {
                    // face k sits between phase cells k and k+1
                    let mut v = vec![0.0; l];
                    for (k, vk) in v.iter_mut().enumerate() {
                        let (sn1, cs1) = faces[k];
                        let mut acc = 0.0;
                        for (hi, &(h, a)) in harmonics.iter().enumerate() {
                            let (sn, cs) = if h == 1.0 { (sn1, cs1) } else { (h * (k + 1) as f64 * du).sin_cos() };
                            acc += a * (mom[hi].0 * cs - mom[hi].1 * sn);
                        }
                        *vk = coupling.strength * acc;
                        if !(vk.abs() <= bound * (1.0 + 1e-12) + 1e-15) {
                            return Err(Error::Numerical {
                                time: t,
                                reason: format!("face velocity {vk} on cell {cell} exceeds the bound {bound}"),
                            });
                        }
                    }
                    let cfl = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) * lambda;
                    let flux: Vec<f64> = (0..l)
                        .map(|k| v[k].max(0.0) * r[k] + v[k].min(0.0) * r[(k + 1) % l])
                        .collect();
                    let next: Vec<f64> = (0..l)
                        .map(|k| r[k] - lambda * (flux[k] - flux[(k + l - 1) % l]))
                        .collect();
                    let drift = ((next.iter().sum::<f64>() - r.iter().sum::<f64>()) * du).abs();
                    Ok((next, cfl, drift))
                })
                .collect();
            for (cell, res) in step.into_iter().enumerate() {
                let (next, cfl, drift) = res?;
                if cfl > MAX_CFL {
                    return Err(Error::Cfl(cfl));
                }
                max_cfl = max_cfl.max(cfl);
                max_drift = max_drift.max(drift);
                rho[cell] = next;
            }
        }
        out.push(rho.clone());
    }
    Ok(FvSolution {
        grid,
        times,
        u_resolution: l,
        densities: out,
        max_mass_drift: max_drift,
        max_cfl,
    })
}
