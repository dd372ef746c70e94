//! Initial phase densities `ρ⁰(u, x)` on `𝕋 × Ω`, their cell averages over
//! node cells, and the particle families built from them.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{MeasureFamily, PhaseMeasure};
use crate::torus::{wrap_phase, TorusGrid};

/// Phase resolution used for cell profiles unless stated otherwise.
pub const DEFAULT_PHASE_RESOLUTION: usize = 4096;
/// Node subsamples per cell when averaging an `x`-dependent density.
const X_SUBSAMPLES: usize = 16;
/// Tolerance of the per-cell normalization check.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDensity {
    /// `1 / 2π`.
    Uniform,
    /// `∝ exp(κ cos(u − centre − 2π·twist·x))`.
    VonMises {
        concentration: f64,
        #[serde(default)]
        centre: f64,
        #[serde(default)]
        twist: f64,
    },
    /// Raised cosine of half-width `halfwidth` around `centre`.
    Spike { centre: f64, halfwidth: f64 },
    /// Von Mises bumps centred at `left_centre` for `x < 1/2` and at
    /// `right_centre` otherwise.
    TwoBlock {
        concentration: f64,
        left_centre: f64,
        right_centre: f64,
    },
    /// Row-major step function, `values[i * u_resolution + k]` on node cell `i`
    /// and phase cell `k`.
    Tabulated {
        x_resolution: usize,
        u_resolution: usize,
        values: Vec<f64>,
    },
}

/// `2π I₀(κ)` by the periodic trapezoid rule, which is spectrally accurate here.
fn von_mises_norm(kappa: f64) -> f64 {
    let n = 1024;
    let h = TAU / n as f64;
    (0..n).map(|k| (kappa * (k as f64 * h).cos()).exp()).sum::<f64>() * h
}

impl InitialDensity {
    pub fn bump(concentration: f64, twist: f64) -> Self {
        InitialDensity::VonMises {
            concentration,
            centre: 0.0,
            twist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialDensity::Uniform => Ok(()),
            InitialDensity::VonMises {
                concentration,
                centre,
                twist,
            } => {
                if !(concentration.is_finite() && *concentration >= 0.0)
                    || !centre.is_finite()
                    || !twist.is_finite()
                {
                    return Err(Error::InvalidParameter(
                        "von Mises density needs finite centre/twist and concentration >= 0".into(),
                    ));
                }
                Ok(())
            }
            InitialDensity::Spike { centre, halfwidth } => {
                if !centre.is_finite() || !(*halfwidth > 0.0 && *halfwidth <= PI) {
                    return Err(Error::InvalidParameter(format!(
                        "spike half-width must lie in (0, π], got {halfwidth}"
                    )));
                }
                Ok(())
            }
            InitialDensity::TwoBlock {
                concentration,
                left_centre,
                right_centre,
            } => {
                if !(concentration.is_finite() && *concentration >= 0.0)
                    || !left_centre.is_finite()
                    || !right_centre.is_finite()
                {
                    return Err(Error::InvalidParameter("bad two-block density parameters".into()));
                }
                Ok(())
            }
            InitialDensity::Tabulated {
                x_resolution,
                u_resolution,
                values,
            } => {
                if *x_resolution == 0 || *u_resolution == 0 || values.len() != x_resolution * u_resolution {
                    return Err(Error::InvalidParameter(format!(
                        "tabulated density needs {x_resolution} x {u_resolution} values, got {}",
                        values.len()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "tabulated density must be finite and nonnegative, got {v}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Whether the density is constant in `x`.
    pub fn is_node_independent(&self) -> bool {
        match self {
            InitialDensity::Uniform | InitialDensity::Spike { .. } => true,
            InitialDensity::VonMises { twist, .. } => *twist == 0.0,
            InitialDensity::TwoBlock {
                left_centre,
                right_centre,
                ..
            } => left_centre == right_centre,
            InitialDensity::Tabulated { x_resolution, .. } => *x_resolution == 1,
        }
    }

    /// `ρ⁰(u, x)`.
    pub fn value(&self, u: f64, x: f64) -> f64 {
        self.unnormalized(u, x) / self.normalizer()
    }

    /// `2π I₀(κ)` for the von Mises shapes, one otherwise.
    fn normalizer(&self) -> f64 {
        match self {
            InitialDensity::VonMises { concentration, .. }
            | InitialDensity::TwoBlock { concentration, .. } => von_mises_norm(*concentration),
            _ => 1.0,
        }
    }

    fn unnormalized(&self, u: f64, x: f64) -> f64 {
        match self {
            InitialDensity::Uniform => 1.0 / TAU,
            InitialDensity::VonMises {
                concentration,
                centre,
                twist,
            } => (concentration * (u - centre - TAU * twist * x).cos()).exp(),
            InitialDensity::Spike { centre, halfwidth } => {
                let s = crate::torus::circle_dist(u, *centre, TAU);
                if s < *halfwidth {
                    (1.0 + (PI * s / halfwidth).cos()) / (2.0 * halfwidth)
                } else {
                    0.0
                }
            }
            InitialDensity::TwoBlock {
                concentration,
                left_centre,
                right_centre,
            } => {
                let c = if crate::torus::wrap_unchecked(x, 1.0) < 0.5 {
                    left_centre
                } else {
                    right_centre
                };
                (concentration * (u - c).cos()).exp()
            }
            InitialDensity::Tabulated {
                x_resolution,
                u_resolution,
                values,
            } => {
                let xg = TorusGrid::new(*x_resolution).expect("validated");
                let i = xg.cell_of(x);
                let k = ((wrap_phase(u) / TAU) * *u_resolution as f64) as usize;
                values[i * u_resolution + k.min(u_resolution - 1)]
            }
        }
    }

    /// Masses of the cell average `n ∫_{cell} ρ⁰(·, x) dx` on `u_resolution` phase cells.
    pub fn cell_profile(&self, grid: &TorusGrid, cell: usize, u_resolution: usize) -> Result<CellProfile> {
        self.validate()?;
        if u_resolution == 0 {
            return Err(Error::InvalidParameter("phase resolution must be positive".into()));
        }
        let du = TAU / u_resolution as f64;
        let xs: Vec<f64> = if self.is_node_independent() {
            vec![grid.midpoint(cell)]
        } else {
            let h = grid.cell_measure() / X_SUBSAMPLES as f64;
            (0..X_SUBSAMPLES)
                .map(|s| grid.left(cell) + (s as f64 + 0.5) * h)
                .collect()
        };
        if let InitialDensity::Spike { centre, halfwidth } = *self {
            return Ok(CellProfile::new(
                (0..u_resolution)
                    .map(|k| spike_cell_mass(centre, halfwidth, k as f64 * du, du))
                    .collect(),
            ));
        }
        let norm = self.normalizer();
        // three-point Gauss-Legendre rule in u on every phase cell
        let r = 0.5 * (0.6f64).sqrt();
        let nodes = [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)];
        let masses: Vec<f64> = (0..u_resolution)
            .map(|k| {
                let cell: f64 = nodes
                    .iter()
                    .map(|&(t, w)| {
                        let u = (k as f64 + t) * du;
                        w * xs.iter().map(|&x| self.unnormalized(u, x)).sum::<f64>()
                    })
                    .sum();
                cell / (xs.len() as f64 * norm) * du
            })
            .collect();
        Ok(CellProfile::new(masses))
    }

    /// Per-cell check that `∫ ρ⁰(u, ·) du = 1`, reporting every defective cell.
    pub fn check_normalized(&self, grid: &TorusGrid, u_resolution: usize) -> Result<Vec<CellProfile>> {
        let profiles: Vec<CellProfile> = (0..grid.len())
            .map(|i| self.cell_profile(grid, i, u_resolution))
            .collect::<Result<_>>()?;
        let defects: Vec<String> = profiles
            .iter()
            .enumerate()
            .filter(|(_, p)| (p.total() - 1.0).abs() > NORMALIZATION_TOL)
            .map(|(i, p)| format!("cell {i}: mass {:.9} (defect {:+.3e})", p.total(), p.total() - 1.0))
            .collect();
        if !defects.is_empty() {
            return Err(Error::NotNormalized(defects.join("; ")));
        }
        Ok(profiles)
    }
}

/// Exact mass of the raised-cosine spike on `[a, a + du)`.
fn spike_cell_mass(centre: f64, h: f64, a: f64, du: f64) -> f64 {
    let g = |s: f64| {
        let s = s.clamp(-h, h);
        (s + h / PI * (PI * s / h).sin()) / (2.0 * h)
    };
    let sa = wrap_phase(a - centre + PI) - PI;
    [-TAU, 0.0, TAU]
        .iter()
        .map(|o| g(sa + du + o) - g(sa + o))
        .sum()
}

/// A step density on `u_resolution` equal phase cells, stored as cell masses.
#[derive(Debug, Clone, PartialEq)]
pub struct CellProfile {
    masses: Vec<f64>,
    cdf: Vec<f64>,
}

impl CellProfile {
    pub fn new(masses: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for &m in &masses {
            acc += m;
            cdf.push(acc);
        }
        Self { masses, cdf }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("cdf starts with 0")
    }

    pub fn cell_width(&self) -> f64 {
        TAU / self.masses.len() as f64
    }

    /// Inverse of the piecewise-linear CDF at level `q·total`, `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.total();
        // first k with cdf[k+1] >= target
        let k = self.cdf[1..]
            .partition_point(|&c| c < target)
            .min(self.masses.len() - 1);
        let m = self.masses[k];
        let frac = if m > 0.0 { ((target - self.cdf[k]) / m).clamp(0.0, 1.0) } else { 0.5 };
        wrap_phase((k as f64 + frac) * self.cell_width())
    }

    /// Atoms at the phase-cell midpoints carrying the cell masses.
    pub fn to_measure(&self) -> PhaseMeasure {
        let du = self.cell_width();
        PhaseMeasure::from_wrapped(
            self.masses
                .iter()
                .enumerate()
                .map(|(k, &m)| ((k as f64 + 0.5) * du, m))
                .collect(),
        )
    }
}

/// Deterministic particle family: `particles` atoms of weight `1/particles` at the
/// quantiles `(k + 1/2)/particles` of each cell-averaged density.
pub fn quantile_family(rho: &InitialDensity, grid: TorusGrid, particles: usize) -> Result<MeasureFamily> {
    if particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle per fiber".into()));
    }
    let profiles = rho.check_normalized(&grid, DEFAULT_PHASE_RESOLUTION)?;
    let w = 1.0 / particles as f64;
    let fibers = profiles
        .iter()
        .map(|p| {
            PhaseMeasure::from_wrapped(
                (0..particles)
                    .map(|k| (p.quantile((k as f64 + 0.5) * w), w))
                    .collect(),
            )
        })
        .collect();
    MeasureFamily::new(grid, 1.0, fibers)
}

/// The density itself, as masses at `u_resolution` phase-cell midpoints per fiber.
pub fn density_family(rho: &InitialDensity, grid: TorusGrid, u_resolution: usize) -> Result<MeasureFamily> {
    let profiles = rho.check_normalized(&grid, u_resolution)?;
    let fibers = profiles.iter().map(CellProfile::to_measure).collect();
    MeasureFamily::new(grid, 1.0 + NORMALIZATION_TOL, fibers)
}
