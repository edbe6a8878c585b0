//! Stable norm of periodic metrics on the torus.
//!
//! The primal side computes minimal loop lengths on a lifted lattice graph;
//! the dual side minimizes the sup norm of closed 1-forms in a class.

mod dual;
mod metric;
mod primal;
mod verify;

pub use dual::{dual_lower_bound, stable_norm_dual, DualEstimate, DualSettings};
pub use metric::{MetricSpec, TorusMetric};
pub use primal::{
    loop_length, loop_length_min, stable_norm_primal, stencil_slack, NormEstimate, PrimalSettings, Stencil,
};
pub use verify::{mather_beta, BetaEstimate, verify_growth_bound, Branch, GrowthNormReport, FLAT_AGREEMENT};
