pub mod baselines;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod filter;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod scenarios;
