//! Deterministic finite-size references: moment equations, the master
//! equation on tiny lattices and the candidate covariance limits.

mod banded;
pub mod covariance;
pub mod master;
pub mod moments;
pub mod sdirk;

pub use covariance::{
    compare_limits, covariance_limit_green, covariance_limit_product_kernel, time_decorrelation_check,
    ClosestFormula, LimitComparison,
};
pub use master::{master_equation_distribution, master_equation_trajectory, MasterDistribution};
pub use moments::{
    moment_trajectory, one_point_evolution, one_point_trajectory, two_point_evolution, MomentField,
    OracleOptions, PairArray,
};
