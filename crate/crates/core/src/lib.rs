//! Mean estimation through statistical queries without range dependence.
//!
//! Distributions have finite real support so every expectation, tail and
//! quantile has an exact value to check against. Estimators talk to a
//! [`StatisticalOracle`] and never see samples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod oracles;

pub use dist::{
    clamp, discretize_round_down, exact_lower_tail, exact_mean, exact_moments, exact_tail,
    residual, second_moment_about, FiniteDistribution, Moments, Query,
};
pub use error::{Error, Result};
pub use estimators::{EstimateReport, OracleFactory, VstatFactory};
pub use oracles::{
    vstat_tolerance, vstat_via_comm, BudgetLedger, CommOracle, CommPlan, CommSimOracle, Policy,
    QueryLog, StatOracle, StatisticalOracle, VstatOracle,
};
