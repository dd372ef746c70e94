//! Vlasov-Fokker-Planck equation on graphops: characteristic field, flow map,
//! Picard iteration of the fixed-point map and a finite-volume transport solver.

mod diagnostic;
mod field;
mod flow;
mod fv;
mod picard;

pub use diagnostic::{adjacent_modulus, continuity_in_x_diagnostic, refinement_trend, ModulusReport, StampModulus};
pub use field::{field_direct, FieldEvaluator};
pub use flow::{flow_map, flow_step, ConstantField, VelocityField};
pub use fv::{fv_transport_solve, FvConfig, FvSolution, MAX_CFL};
pub use picard::{picard_solve, picard_solve_from, PicardConfig, PicardStart, SolverState};
