//! Concrete fractional programs.

mod l4;
mod piecewise;
mod sparse;

pub use l4::{l4_fcd_step, l4_quartic_radicand, recover_unit_solution, EigL4Cache, EigL4Problem};
pub use piecewise::PiecewiseRatio;
pub use sparse::{
    sr_pcd_step, subgrad_topk, topk_magnitude_sum, Curvature, SparseRecoveryCache, SparseRecoveryProblem,
};
