use crate::error::{Error, Result};
use crate::kuramoto::whole_steps;
use crate::torus::wrap_phase;

use super::field::FieldEvaluator;

/// A phase velocity `V(t, u)` on each node cell.
pub trait VelocityField {
    fn velocity(&self, t: f64, u: f64, cell: usize) -> Result<f64>;
}

impl VelocityField for FieldEvaluator {
    #[inline]
    fn velocity(&self, t: f64, u: f64, cell: usize) -> Result<f64> {
        self.field(t, u, cell)
    }
}

/// `V ≡ c` on every cell.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl VelocityField for ConstantField {
    fn velocity(&self, _t: f64, _u: f64, _cell: usize) -> Result<f64> {
        Ok(self.0)
    }
}

/// One RK4 step of `dP/dt = V(t, P, x_cell)` for every particle.
pub fn flow_step<F: VelocityField + ?Sized>(
    field: &F,
    cell: usize,
    particles: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    particles.iter().map(|&p| rk4(field, cell, p, t, dt)).collect()
}

#[inline]
pub(crate) fn rk4<F: VelocityField + ?Sized>(field: &F, cell: usize, p: f64, t: f64, dt: f64) -> Result<f64> {
    let k1 = field.velocity(t, p, cell)?;
    let k2 = field.velocity(t + 0.5 * dt, p + 0.5 * dt * k1, cell)?;
    let k3 = field.velocity(t + 0.5 * dt, p + 0.5 * dt * k2, cell)?;
    let k4 = field.velocity(t + dt, p + dt * k3, cell)?;
    let q = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !q.is_finite() {
        return Err(Error::Numerical {
            time: t + dt,
            reason: format!("characteristic from {p} became non-finite"),
        });
    }
    Ok(wrap_phase(q))
}

/// The characteristic flow `T_{t1, t0}` applied to `particles`, in whole steps of `dt`.
pub fn flow_map<F: VelocityField + ?Sized>(
    field: &F,
    cell: usize,
    particles: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let steps = whole_steps(t1 - t0, dt, "flow interval")?;
    let mut p = particles.to_vec();
    for s in 0..steps {
        p = flow_step(field, cell, &p, t0 + s as f64 * dt, dt)?;
    }
    Ok(p)
}
