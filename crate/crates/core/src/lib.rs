//! Graphop mean-field limits for Kuramoto-type models on the circle group.
//!
//! The crate is organised bottom-up:
//!
//! * [`torus`]: the node circle `[0, 1)` and the phase circle `[0, 2π)`.
//! * [`graphop`]: graphops through their fiber measures, graphon kernels.
//! * [`summability`]: Fejér / wrapped-Gaussian kernels and `K_n A K_n`.
//! * [`measure`], [`bounded_lipschitz`], [`metrics`]: particle measures,
//!   the bounded-Lipschitz distance and the family metrics built on it.
//! * [`kuramoto`]: the finite oscillator model on sampled weights.
//! * [`vfpe`]: characteristic field, flow, Picard iteration and the
//!   finite-volume transport cross-check.
//! * [`io`]: the columnar text formats.

pub mod error;
pub mod torus;
pub mod graphop;
pub mod summability;
pub mod measure;
pub mod density;
pub mod bounded_lipschitz;
pub mod metrics;
pub mod coupling;
pub mod kuramoto;
pub mod vfpe;
pub mod io;

pub use error::{Error, Result};
pub use graphop::{FiberMatrix, FiberMeasure, GraphonKernel, Graphop, GraphopKind, GraphopSpec, GridFn};
pub use summability::{fejer, wrapped_gaussian, KernelFamily, SummabilityKernel};
pub use torus::{Circle, TorusGrid, TorusPoint};
pub use measure::{extended_apply, MeasureFamily, PhaseMeasure, Trajectory};
pub use density::{density_family, quantile_family, CellProfile, InitialDensity};
pub use bounded_lipschitz::d_bl;
pub use coupling::{CouplingFunction, CouplingSpec};
pub use kuramoto::{PhaseTrajectory, WeightMatrix};
pub use vfpe::{fv_transport_solve, picard_solve, FvConfig, FvSolution, PicardConfig, SolverState};
