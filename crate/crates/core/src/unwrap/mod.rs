//! Displacement extraction from wrapped multi-offset phase images.

mod cross;
mod gradient;
mod objective;
mod solve;

pub use cross::{cross_phase_ratios, CrossDiffSet, CrossPair};
pub use gradient::{wrapped_phase_gradient, GradientStencil, PhaseGradientTarget};
pub use objective::{dual_dc_objective, ObjectiveGradient, ObjectiveValue, NORM_EPSILON};
pub use solve::{
    gauge_adjust, unwrap, unwrap_masked, wrapped_least_squares, ConvergenceRecord, InitMode,
    UnwrapConfig, UnwrapOutcome,
};
