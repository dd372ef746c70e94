//! Coupling functions `D` on the phase circle and their strength
//! shared by the oscillator model and the mean-field solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An odd trigonometric coupling `D(u) = Σ_h a_h sin(h u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingFunction {
    /// `sin u`.
    Sine,
    /// `(sin u + β sin(2u) / 2) / (1 + |β|)`; the factor keeps both the
    /// Lipschitz constant and the sup norm at most one.
    SineSecondHarmonic { beta: f64 },
}

impl Default for CouplingFunction {
    fn default() -> Self {
        CouplingFunction::Sine
    }
}

impl CouplingFunction {
    pub fn validate(&self) -> Result<()> {
        if let CouplingFunction::SineSecondHarmonic { beta } = self {
            if !(beta.abs() <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "second-harmonic weight must satisfy |beta| <= 1, got {beta}"
                )));
            }
        }
        Ok(())
    }

    /// `(h, a_h)` pairs.
    pub fn harmonics(&self) -> Vec<(f64, f64)> {
        match *self {
            CouplingFunction::Sine => vec![(1.0, 1.0)],
            CouplingFunction::SineSecondHarmonic { beta } => {
                let s = 1.0 + beta.abs();
                vec![(1.0, 1.0 / s), (2.0, 0.5 * beta / s)]
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.harmonics().iter().map(|&(h, a)| a * (h * u).sin()).sum()
    }

    /// `sup |D|`, from the critical points of the trigonometric polynomial.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            CouplingFunction::Sine => 1.0,
            CouplingFunction::SineSecondHarmonic { beta } => {
                // D' ∝ cos u + β cos 2u = 2β c² + c − β with c = cos u
                let mut cs = vec![1.0, -1.0];
                if beta == 0.0 {
                    cs.push(0.0);
                } else {
                    let disc = 1.0 + 8.0 * beta * beta;
                    for r in [(-1.0 + disc.sqrt()) / (4.0 * beta), (-1.0 - disc.sqrt()) / (4.0 * beta)] {
                        if r.abs() <= 1.0 {
                            cs.push(r);
                        }
                    }
                }
                cs.into_iter()
                    .map(|c: f64| self.eval(c.clamp(-1.0, 1.0).acos()).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// `Σ_h h |a_h|`, an upper bound for the Lipschitz constant.
    pub fn lipschitz_bound(&self) -> f64 {
        self.harmonics().iter().map(|&(h, a)| h * a.abs()).sum()
    }
}

/// Coupling function, strength `C` and optional intrinsic frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    #[serde(default)]
    pub function: CouplingFunction,
    pub strength: f64,
    /// Per-oscillator frequencies of the discrete model; empty means all zero.
    #[serde(default)]
    pub frequencies: Vec<f64>,
}

impl CouplingSpec {
    pub fn new(function: CouplingFunction, strength: f64) -> Result<Self> {
        let spec = Self {
            function,
            strength,
            frequencies: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sine(strength: f64) -> Result<Self> {
        Self::new(CouplingFunction::Sine, strength)
    }

    pub fn with_frequencies(mut self, frequencies: Vec<f64>) -> Result<Self> {
        self.frequencies = frequencies;
        self.validate()?;
        Ok(self)
    }

    /// `C = 0` is accepted so that decoupled runs can be expressed.
    pub fn validate(&self) -> Result<()> {
        self.function.validate()?;
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling strength must be finite and nonnegative, got {}",
                self.strength
            )));
        }
        if let Some(w) = self.frequencies.iter().find(|w| !w.is_finite()) {
            return Err(Error::NonFinite(*w));
        }
        Ok(())
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.frequencies.get(i).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::circle_dist;
    use std::f64::consts::TAU;

    fn shipped() -> Vec<CouplingFunction> {
        let mut v = vec![CouplingFunction::Sine];
        v.extend([-1.0, -0.5, 0.3, 1.0].map(|beta| CouplingFunction::SineSecondHarmonic { beta }));
        v
    }

    #[test]
    fn lipschitz_and_sup_on_a_fine_grid() {
        let n = 20_000;
        let us: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        for d in shipped() {
            let vals: Vec<f64> = us.iter().map(|&u| d.eval(u)).collect();
            let grid_sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(grid_sup <= 1.0 + 1e-12);
            assert!(d.sup_norm() >= grid_sup - 1e-12 && d.sup_norm() <= grid_sup + 1e-6);
            for k in 0..n {
                for step in [1, 7, 331, n / 2] {
                    let j = (k + step) % n;
                    assert!((vals[k] - vals[j]).abs() <= circle_dist(us[k], us[j], TAU) + 1e-12);
                }
            }
            assert!(d.lipschitz_bound() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CouplingFunction::SineSecondHarmonic { beta: 1.5 }.validate().is_err());
        assert!(CouplingSpec::sine(-1.0).is_err());
        assert!(CouplingSpec::sine(1.0).unwrap().with_frequencies(vec![f64::NAN]).is_err());
        assert_eq!(CouplingSpec::sine(0.0).unwrap().frequency(3), 0.0);
    }
}
