//! Weak-instrument-robust test statistics and decisions on reduced-form fits.

mod clr;
mod decision;
mod reduced;
mod stats;

pub use clr::{clr_critical_value, quantile_rank, ClrNullDraws};
pub use decision::{decide, evaluate_test, needs_draws, run_test, TestOutcome, DEFAULT_SIMS};
pub use reduced::{fit_reduced_form, joint_covariance, ReducedFormFit};
pub use stats::{
    clr_from_components, d_stat, g_stat, half_sum_root, lambda, omega, rar, rclr, rk, rw, scaled_g_and_d,
    StatKind, StatResult, Statistics, D_ZERO_THRESHOLD,
};
