//! The finite Kuramoto-type model
//!
//! `u̇_i = ω_i + (C/N) Σ_j A_ij D(u_j − u_i)`
//!
//! on weights sampled from a graphon kernel, with random initial phases drawn
//! from cell averages of a density, a fixed-step RK4 integrator and the
//! empirical measure families of the resulting phases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coupling::CouplingSpec;
use crate::density::{InitialDensity, DEFAULT_PHASE_RESOLUTION};
use crate::error::{Error, Result};
use crate::graphop::GraphonKernel;
use crate::measure::{MeasureFamily, PhaseMeasure};
use crate::torus::{wrap_phase, TorusGrid};

/// Symmetric nonnegative `N × N` weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMatrix {
    Dense { n: usize, values: Vec<f64> },
    /// `A_ij = block[labels[i] * blocks + labels[j]]`: the weights of a step
    /// kernel, applied in `O(N + blocks²)`.
    Blocked {
        labels: Vec<usize>,
        blocks: usize,
        block: Vec<f64>,
    },
}

impl WeightMatrix {
    pub fn ones(n: usize) -> Self {
        WeightMatrix::Blocked {
            labels: vec![0; n],
            blocks: 1,
            block: vec![1.0],
        }
    }

    pub fn dense(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "dense weights need {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("weights must be nonnegative, got {v}")));
        }
        Ok(WeightMatrix::Dense { n, values })
    }

    pub fn len(&self) -> usize {
        match self {
            WeightMatrix::Dense { n, .. } => *n,
            WeightMatrix::Blocked { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            WeightMatrix::Dense { n, values } => values[i * n + j],
            WeightMatrix::Blocked {
                labels,
                blocks,
                block,
            } => block[labels[i] * blocks + labels[j]],
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        (0..n * n).map(|k| self.get(k / n, k % n)).collect()
    }

    pub fn sup(&self) -> f64 {
        match self {
            WeightMatrix::Dense { values, .. } => values.iter().copied().fold(0.0, f64::max),
            WeightMatrix::Blocked { block, .. } => block.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `max_i N⁻¹ Σ_j A_ij`.
    pub fn max_normalized_degree(&self) -> f64 {
        let ones = vec![1.0; self.len()];
        let n = self.len().max(1) as f64;
        self.matvec(&ones).into_iter().fold(0.0, f64::max) / n
    }

    /// `A v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            WeightMatrix::Dense { n, values } => values
                .par_chunks(*n)
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
            WeightMatrix::Blocked {
                labels,
                blocks,
                block,
            } => {
                let mut t = vec![0.0; *blocks];
                for (&l, &x) in labels.iter().zip(v) {
                    t[l] += x;
                }
                let per_label: Vec<f64> = block
                    .chunks(*blocks)
                    .map(|row| row.iter().zip(&t).map(|(a, b)| a * b).sum())
                    .collect();
                labels.iter().map(|&l| per_label[l]).collect()
            }
        }
    }
}

/// `A_ij = N² ∫∫_{cell_i × cell_j} W`.
///
/// Exact whenever the kernel grid and `N` are commensurate (either divides the
/// other). Otherwise `A_ij = W(x_i, x_j)` at the cell midpoints, with an
/// `O(1/resolution)` bias.
pub fn sample_weights(w: &GraphonKernel, n: usize) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one oscillator".into()));
    }
    let r = w.grid().len();
    let vals = w.values();
    if r % n == 0 {
        let q = r / n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            // upper triangle only, so rounding cannot break symmetry
            for j in i..n {
                let mut acc = 0.0;
                for a in i * q..(i + 1) * q {
                    acc += vals[a * r + j * q..a * r + (j + 1) * q].iter().sum::<f64>();
                }
                out[i * n + j] = acc / (q * q) as f64;
                out[j * n + i] = out[i * n + j];
            }
        }
        return WeightMatrix::dense(n, out);
    }
    let fine = TorusGrid::new(n)?;
    let labels: Vec<usize> = if n % r == 0 {
        (0..n).map(|i| i / (n / r)).collect()
    } else {
        log::debug!("kernel grid {r} and {n} oscillators are incommensurate; sampling at midpoints");
        fine.midpoints().map(|x| w.grid().cell_of(x)).collect()
    };
    if n <= r {
        let out = (0..n * n).map(|k| vals[labels[k / n] * r + labels[k % n]]).collect();
        return WeightMatrix::dense(n, out);
    }
    Ok(WeightMatrix::Blocked {
        labels,
        blocks: r,
        block: vals.to_vec(),
    })
}

/// `N = nM` phases; oscillators `jM..(j+1)M` are i.i.d. with the cell average of
/// `ρ⁰` over coarse cell `j`, drawn by inverse CDF from a seeded ChaCha stream.
pub fn sample_initial(rho: &InitialDensity, n: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one oscillator per cell".into()));
    }
    let grid = TorusGrid::new(n)?;
    let profiles = rho.check_normalized(&grid, DEFAULT_PHASE_RESOLUTION)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * m);
    for p in &profiles {
        for _ in 0..m {
            out.push(p.quantile(rng.gen::<f64>()));
        }
    }
    Ok(out)
}

/// The step rule `min(1e-2, 0.1 / (C · sup degree))`.
pub fn default_dt(strength: f64, sup_degree: f64) -> f64 {
    let scale = strength * sup_degree;
    if scale > 0.0 {
        (0.1 / scale).min(1e-2)
    } else {
        1e-2
    }
}

/// Phases at the stored stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    pub phases: Vec<Vec<f64>>,
}

/// Number of whole steps of size `dt` in `span`, if it is (numerically) integral.
pub(crate) fn whole_steps(span: f64, dt: f64, what: &str) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: need dt > 0 and a finite span")));
    }
    let k = (span / dt).round();
    if (k * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what}: span {span} is not an integer multiple of {dt}"
        )));
    }
    Ok(k as usize)
}

fn rhs(phases: &[f64], weights: &WeightMatrix, coupling: &CouplingSpec) -> Vec<f64> {
    let n = phases.len();
    let mut out: Vec<f64> = (0..n).map(|i| coupling.frequency(i)).collect();
    if coupling.strength == 0.0 {
        return out;
    }
    let scale = coupling.strength / n as f64;
    for (h, a) in coupling.function.harmonics() {
        let (s, c): (Vec<f64>, Vec<f64>) = phases.par_iter().map(|&u| (h * u).sin_cos()).unzip();
        let as_ = weights.matvec(&s);
        let ac = weights.matvec(&c);
        // Σ_j A_ij sin(h(u_j − u_i)) = cos(h u_i)(A s)_i − sin(h u_i)(A c)_i
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o += scale * a * (c[i] * as_[i] - s[i] * ac[i]);
        });
    }
    out
}

/// Classical RK4 with phases wrapped to `[0, 2π)` after every step; stamps are
/// stored every `dt_out` starting at `t = 0`.
pub fn integrate(
    phases: &[f64],
    weights: &WeightMatrix,
    coupling: &CouplingSpec,
    t_end: f64,
    dt: f64,
    dt_out: f64,
) -> Result<PhaseTrajectory> {
    coupling.validate()?;
    if weights.len() != phases.len() {
        return Err(Error::InvalidParameter(format!(
            "{} phases but {} x {} weights",
            phases.len(),
            weights.len(),
            weights.len()
        )));
    }
    if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(*p));
    }
    let steps = whole_steps(t_end, dt, "integration horizon")?;
    let per_out = whole_steps(dt_out, dt, "output interval")?.max(1);
    let mut u: Vec<f64> = phases.iter().map(|&p| wrap_phase(p)).collect();
    let mut times = vec![0.0];
    let mut out = vec![u.clone()];
    let axpy = |u: &[f64], k: &[f64], h: f64| -> Vec<f64> { u.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for step in 1..=steps {
        let k1 = rhs(&u, weights, coupling);
        let k2 = rhs(&axpy(&u, &k1, 0.5 * dt), weights, coupling);
        let k3 = rhs(&axpy(&u, &k2, 0.5 * dt), weights, coupling);
        let k4 = rhs(&axpy(&u, &k3, dt), weights, coupling);
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(i) = u.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numerical {
                time: step as f64 * dt,
                reason: format!("oscillator {i} became non-finite at step {step}"),
            });
        }
        u.iter_mut().for_each(|p| *p = wrap_phase(*p));
        if step % per_out == 0 {
            times.push(step as f64 * dt);
            out.push(u.clone());
        }
    }
    Ok(PhaseTrajectory { times, phases: out })
}

/// Fiber `i` holds atoms of weight `1/M` at the phases of oscillators `iM..(i+1)M`.
pub fn empirical_family(phases: &[f64], n: usize, m: usize) -> Result<MeasureFamily> {
    if m == 0 || n == 0 || phases.len() != n * m {
        return Err(Error::InvalidParameter(format!(
            "{} phases cannot be split into {n} blocks of {m}",
            phases.len()
        )));
    }
    let grid = TorusGrid::new(n)?;
    let w = 1.0 / m as f64;
    let fibers = phases
        .chunks(m)
        .map(|block| PhaseMeasure::new(block.iter().map(|&u| (u, w)).collect()))
        .collect::<Result<Vec<_>>>()?;
    MeasureFamily::new(grid, 1.0, fibers)
}
