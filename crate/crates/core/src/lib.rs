//! Coordinate descent for structured fractional minimization
//! `min_x (f(x) + h(x)) / g(x)`.
//!
//! The two coordinate methods ([`cd::run_cd`]) solve each one-dimensional
//! subproblem globally: FCD minimizes a majorized ratio, PCD a parametric
//! surrogate with `λ = F(x)`. [`baselines`] holds the reference algorithms and
//! [`stationarity`] the point-classification diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cd;
pub mod data;
pub mod error;
pub mod fractional;
pub mod problems;
pub mod scalar;
pub mod stationarity;

pub use error::{Error, Result};
pub use fractional::{
    alpha_sandwich_check, apply_step, check_sufficient_decrease, evaluate_objective, make_state,
    CoordinateRule, DenominatorKind, FractionalProblem, Method, SolverConfig, SolverState, Status,
    Trace, TraceRecord,
};
