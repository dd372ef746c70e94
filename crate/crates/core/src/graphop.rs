//! Graphops on the node circle, represented through their fiber measures.
//!
//! Every graphop `A` is described by a family `{ν_x}` of finite measures with
//! `(Af)(x) = ∫ f dν_x`. A fiber is stored as a list of atoms at exact
//! positions plus a piecewise-constant density given by its cell masses on an
//! evaluation grid. Graphon kernels are pure densities, shift graphops are
//! pure atoms, and mixtures combine both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{wrap_unchecked, TorusGrid, NODE_PERIOD};

/// A function on the node circle sampled at the midpoints of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.midpoints().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-constant evaluation: the value of the cell containing `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.values[self.grid.cell_of(x)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ f g dm` by the midpoint rule.
    pub fn inner(&self, other: &GridFn) -> Result<f64> {
        self.check_grid(other)?;
        let h = self.grid.cell_measure();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h)
    }

    pub fn sub(&self, other: &GridFn) -> Result<GridFn> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridFn {
            grid: self.grid,
            values,
        })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn check_grid(&self, other: &GridFn) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                actual: other.grid.len(),
            });
        }
        Ok(())
    }
}

/// The neighbourhood measure `ν_x` of a single node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FiberMeasure {
    /// `(location on the node circle, weight)`.
    pub atoms: Vec<(f64, f64)>,
    /// `(cell index, mass)` of the density part on the evaluation grid.
    pub cells: Vec<(usize, f64)>,
}

impl FiberMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.cells.iter().map(|c| c.1).sum::<f64>()
    }

    pub fn integrate_grid(&self, f: &GridFn) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|&(loc, w)| w * f.at(loc)).sum();
        let dens: f64 = self.cells.iter().map(|&(j, m)| m * f.values[j]).sum();
        atoms + dens
    }

    pub fn integrate_fn(&self, grid: &TorusGrid, f: &dyn Fn(f64) -> f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|&(loc, w)| w * f(loc)).sum();
        let dens: f64 = self.cells.iter().map(|&(j, m)| m * f(grid.midpoint(j))).sum();
        atoms + dens
    }

    /// Collapse atoms onto the cells containing them.
    pub fn to_cells(&self, grid: &TorusGrid) -> Vec<(usize, f64)> {
        let mut acc: Vec<(usize, f64)> = self
            .atoms
            .iter()
            .map(|&(loc, w)| (grid.cell_of(loc), w))
            .chain(self.cells.iter().copied())
            .collect();
        acc.sort_by_key(|c| c.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
        for (j, m) in acc {
            match out.last_mut() {
                Some(last) if last.0 == j => last.1 += m,
                _ => out.push((j, m)),
            }
        }
        out.retain(|c| c.1 != 0.0);
        out
    }
}

/// Cell-to-cell fiber masses: row `i` holds `ν_{x_i}(cell j)` for the midpoint
/// `x_i` of cell `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMatrix {
    grid: TorusGrid,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FiberMatrix {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.1).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.grid.len()];
        for row in &self.rows {
            for &(j, m) in row {
                cols[j] += m;
            }
        }
        cols
    }

    /// Multiply by a per-cell vector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, m)| m * v[j]).sum())
            .collect()
    }

    /// Scale every entry; used for the `0.5·A` style comparisons.
    pub fn scaled(&self, c: f64) -> FiberMatrix {
        FiberMatrix {
            grid: self.grid,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, m)| (j, c * m)).collect())
                .collect(),
        }
    }
}

/// A symmetric nonnegative step-function kernel on `grid × grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphonKernel {
    grid: TorusGrid,
    values: Vec<f64>,
    /// Prefix integrals of each row, `prefix[i][k] = ∫_0^{k/r} W(x_i, y) dy`.
    prefix: Vec<Vec<f64>>,
}

const ASYMMETRY_WARN: f64 = 1e-9;

impl GraphonKernel {
    /// Build from a row-major matrix; the matrix is symmetrized as `(W + Wᵀ)/2`.
    pub fn from_matrix(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        let r = grid.len();
        if values.len() != r * r {
            return Err(Error::GridMismatch {
                expected: r * r,
                actual: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "graphon kernel entries must be finite and nonnegative, found {bad}"
            )));
        }
        let mut sym = values.clone();
        let mut asym: f64 = 0.0;
        for i in 0..r {
            for j in (i + 1)..r {
                let (a, b) = (values[i * r + j], values[j * r + i]);
                asym = asym.max((a - b).abs());
                let m = 0.5 * (a + b);
                sym[i * r + j] = m;
                sym[j * r + i] = m;
            }
        }
        if asym > ASYMMETRY_WARN {
            log::warn!("graphon kernel asymmetric by {asym:.3e}; symmetrized");
        }
        Ok(Self::from_symmetric(grid, sym))
    }

    fn from_symmetric(grid: TorusGrid, values: Vec<f64>) -> Self {
        let r = grid.len();
        let h = grid.cell_measure();
        let prefix = (0..r)
            .map(|i| {
                let mut acc = Vec::with_capacity(r + 1);
                let mut s = 0.0;
                acc.push(0.0);
                for j in 0..r {
                    s += values[i * r + j] * h;
                    acc.push(s);
                }
                acc
            })
            .collect();
        Self {
            grid,
            values,
            prefix,
        }
    }

    /// Sample `w(x, y)` at cell midpoints.
    pub fn from_fn(grid: TorusGrid, w: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let r = grid.len();
        let mut values = Vec::with_capacity(r * r);
        for i in 0..r {
            let x = grid.midpoint(i);
            for j in 0..r {
                values.push(w(x, grid.midpoint(j)));
            }
        }
        Self::from_matrix(grid, values)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::from_matrix(TorusGrid::new(1)?, vec![c])
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let r = self.grid.len();
        self.values[self.grid.cell_of(x) * r + self.grid.cell_of(y)]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `∫_a^b W(x_row, y) dy` for `0 <= a <= b <= 1` on kernel row `row`.
    fn row_integral(&self, row: usize, a: f64, b: f64) -> f64 {
        let p = &self.prefix[row];
        let cum = |y: f64| -> f64 {
            let r = self.grid.len();
            let t = (y * r as f64).clamp(0.0, r as f64);
            let k = (t.floor() as usize).min(r - 1);
            let frac = t - k as f64;
            p[k] + frac * (p[k + 1] - p[k])
        };
        cum(b) - cum(a)
    }

    fn row_mass(&self, row: usize) -> f64 {
        *self.prefix[row].last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphopKind {
    /// Density fibers `ν_x(dy) = W(x, y) dy`.
    Graphon(GraphonKernel),
    /// `ν_x = ½ δ_{x+r} + ½ δ_{x−r}`.
    AtomicShift { shift: f64 },
    /// Density `height/2` on the arcs of half-width `halfwidth` around `x ± shift`.
    ArcBand {
        shift: f64,
        halfwidth: f64,
        height: f64,
    },
    /// Nonnegative combination of graphops.
    Mixture(Vec<(f64, Graphop)>),
}

/// A self-adjoint positivity-preserving operator on the node circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Graphop {
    kind: GraphopKind,
    gamma: f64,
}

impl Graphop {
    pub fn graphon(kernel: GraphonKernel) -> Self {
        let gamma = (0..kernel.grid.len())
            .map(|i| kernel.row_mass(i))
            .fold(0.0, f64::max);
        Self {
            kind: GraphopKind::Graphon(kernel),
            gamma,
        }
    }

    /// The all-to-all graphon `W ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        Ok(Self::graphon(GraphonKernel::constant(c)?))
    }

    pub fn atomic_shift(shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::NonFinite(shift));
        }
        Ok(Self {
            kind: GraphopKind::AtomicShift {
                shift: wrap_unchecked(shift, NODE_PERIOD),
            },
            gamma: 1.0,
        })
    }

    pub fn arc_band(shift: f64, halfwidth: f64, height: f64) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "arc half-width must lie in (0, 1/2], got {halfwidth}"
            )));
        }
        if !(height >= 0.0 && height.is_finite()) || !shift.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "arc band needs finite shift and nonnegative height (shift {shift}, height {height})"
            )));
        }
        Ok(Self {
            kind: GraphopKind::ArcBand {
                shift: wrap_unchecked(shift, NODE_PERIOD),
                halfwidth,
                height,
            },
            gamma: height * 2.0 * halfwidth,
        })
    }

    pub fn mixture(parts: Vec<(f64, Graphop)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("empty mixture".into()));
        }
        if let Some((c, _)) = parts.iter().find(|(c, _)| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "mixture coefficients must be nonnegative, got {c}"
            )));
        }
        let mut g = Self {
            kind: GraphopKind::Mixture(parts),
            gamma: 0.0,
        };
        g.gamma = g.sup_degree();
        Ok(g)
    }

    pub fn scaled(self, c: f64) -> Result<Self> {
        Self::mixture(vec![(c, self)])
    }

    pub fn kind(&self) -> &GraphopKind {
        &self.kind
    }

    /// `γ_A = sup_x ν_x(Ω)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `ν_x(Ω)` at an arbitrary node.
    pub fn degree_at(&self, x: f64) -> f64 {
        match &self.kind {
            GraphopKind::Graphon(k) => k.row_mass(k.grid.cell_of(x)),
            GraphopKind::AtomicShift { .. } => 1.0,
            GraphopKind::ArcBand { .. } => self.gamma,
            GraphopKind::Mixture(parts) => parts.iter().map(|(c, g)| c * g.degree_at(x)).sum(),
        }
    }

    /// Sup of the degree, exact for the piecewise-constant degrees of every variant.
    fn sup_degree(&self) -> f64 {
        let mut breaks = vec![0.0, 1.0];
        self.collect_breakpoints(&mut breaks);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.degree_at(0.5 * (w[0] + w[1])))
            .fold(0.0, f64::max)
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match &self.kind {
            GraphopKind::Graphon(k) => {
                out.extend((0..k.grid.len()).map(|i| k.grid.left(i)));
            }
            GraphopKind::Mixture(parts) => parts.iter().for_each(|(_, g)| g.collect_breakpoints(out)),
            _ => {}
        }
    }

    /// The fiber `ν_x`, with its density part expressed as masses of `grid` cells.
    pub fn fiber(&self, x: f64, grid: &TorusGrid) -> FiberMeasure {
        match &self.kind {
            GraphopKind::Graphon(k) => {
                let row = k.grid.cell_of(x);
                let cells = if k.grid == *grid {
                    let r = grid.len();
                    let h = grid.cell_measure();
                    (0..r)
                        .map(|j| (j, k.values[row * r + j] * h))
                        .filter(|c| c.1 != 0.0)
                        .collect()
                } else {
                    (0..grid.len())
                        .map(|j| {
                            let a = grid.left(j);
                            (j, k.row_integral(row, a, a + grid.cell_measure()))
                        })
                        .filter(|c| c.1 != 0.0)
                        .collect()
                };
                FiberMeasure {
                    atoms: Vec::new(),
                    cells,
                }
            }
            GraphopKind::AtomicShift { shift } => FiberMeasure {
                atoms: vec![
                    (wrap_unchecked(x + shift, NODE_PERIOD), 0.5),
                    (wrap_unchecked(x - shift, NODE_PERIOD), 0.5),
                ],
                cells: Vec::new(),
            },
            GraphopKind::ArcBand {
                shift,
                halfwidth,
                height,
            } => {
                let mut masses = vec![0.0; grid.len()];
                for centre in [x + shift, x - shift] {
                    let (a, b) = (centre - halfwidth, centre + halfwidth);
                    for (j, m) in masses.iter_mut().enumerate() {
                        *m += 0.5 * height * grid.overlap(j, a, b);
                    }
                }
                FiberMeasure {
                    atoms: Vec::new(),
                    cells: masses
                        .into_iter()
                        .enumerate()
                        .filter(|c| c.1 != 0.0)
                        .collect(),
                }
            }
            GraphopKind::Mixture(parts) => {
                let mut atoms = Vec::new();
                let mut masses = vec![0.0; grid.len()];
                for (c, g) in parts {
                    let f = g.fiber(x, grid);
                    atoms.extend(f.atoms.into_iter().map(|(loc, w)| (loc, c * w)));
                    for (j, m) in f.cells {
                        masses[j] += c * m;
                    }
                }
                atoms.retain(|a| a.1 != 0.0);
                FiberMeasure {
                    atoms,
                    cells: masses
                        .into_iter()
                        .enumerate()
                        .filter(|c| c.1 != 0.0)
                        .collect(),
                }
            }
        }
    }

    pub fn fiber_matrix(&self, grid: &TorusGrid) -> FiberMatrix {
        let rows = (0..grid.len())
            .map(|i| self.fiber(grid.midpoint(i), grid).to_cells(grid))
            .collect();
        FiberMatrix { grid: *grid, rows }
    }

    /// `(Af)(x_i)` at every midpoint of `f`'s grid; atoms read the cell containing them.
    pub fn apply(&self, f: &GridFn) -> GridFn {
        let grid = f.grid();
        let values = (0..grid.len())
            .map(|i| self.fiber(grid.midpoint(i), &grid).integrate_grid(f))
            .collect();
        GridFn { grid, values }
    }

    /// `(Af)(x_i)` for a continuous `f`; atoms are evaluated at their exact locations.
    pub fn apply_fn(&self, grid: &TorusGrid, f: &dyn Fn(f64) -> f64) -> GridFn {
        let values = (0..grid.len())
            .map(|i| self.fiber(grid.midpoint(i), grid).integrate_fn(grid, f))
            .collect();
        GridFn {
            grid: *grid,
            values,
        }
    }

    pub fn degree(&self, grid: &TorusGrid) -> GridFn {
        GridFn::from_fn(*grid, |x| self.degree_at(x))
    }

    /// `Some(c)` when the degree stays within `tol` of its mean `c`.
    pub fn check_c_regular(&self, grid: &TorusGrid, tol: f64) -> Option<f64> {
        let deg = self.degree(grid);
        let c = deg.mean();
        let dev = deg.values().iter().fold(0.0f64, |m, d| m.max((d - c).abs()));
        (dev <= tol).then_some(c)
    }

    /// `‖A‖_{1→1}`: exactly `c` for `c`-regular graphops, otherwise the largest
    /// response to a normalized cell indicator.
    pub fn norm_1_to_1(&self, grid: &TorusGrid) -> f64 {
        if let Some(c) = self.check_c_regular(grid, 1e-9) {
            return c;
        }
        self.fiber_matrix(grid)
            .column_sums()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Serializable description of a graphop, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GraphopSpec {
    /// `W ≡ value`.
    Constant { value: f64 },
    /// `W(x, y) = 1 + amplitude·cos(2π(x − y))` sampled on `resolution` cells.
    Cosine { amplitude: f64, resolution: usize },
    /// `W(x, y) = height·1[dist(x, y) < halfwidth]`.
    Band { halfwidth: f64, height: f64 },
    AtomicShift { r: f64 },
    ArcBand { r: f64, halfwidth: f64, height: f64 },
    /// Explicit row-major kernel matrix.
    Graphon { resolution: usize, values: Vec<f64> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub coefficient: f64,
    pub graphop: GraphopSpec,
}

impl GraphopSpec {
    pub fn build(&self) -> Result<Graphop> {
        match self {
            GraphopSpec::Constant { value } => Graphop::constant(*value),
            GraphopSpec::Cosine {
                amplitude,
                resolution,
            } => {
                let grid = TorusGrid::new(*resolution)?;
                let a = *amplitude;
                let k = GraphonKernel::from_fn(grid, |x, y| {
                    1.0 + a * (std::f64::consts::TAU * (x - y)).cos()
                })?;
                Ok(Graphop::graphon(k))
            }
            GraphopSpec::Band { halfwidth, height } => Graphop::arc_band(0.0, *halfwidth, *height),
            GraphopSpec::AtomicShift { r } => Graphop::atomic_shift(*r),
            GraphopSpec::ArcBand {
                r,
                halfwidth,
                height,
            } => Graphop::arc_band(*r, *halfwidth, *height),
            GraphopSpec::Graphon { resolution, values } => Ok(Graphop::graphon(
                GraphonKernel::from_matrix(TorusGrid::new(*resolution)?, values.clone())?,
            )),
            GraphopSpec::Mixture { components } => Graphop::mixture(
                components
                    .iter()
                    .map(|c| Ok((c.coefficient, c.graphop.build()?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }
}
