//! Fractional Brownian motion regressors, the kernel-weighted statistic
//! `S_n = Σ K(n^α B¹_i)(B²_{i+1} − B²_i)`, its exact moments, local-time
//! estimators, and seeded Monte Carlo checks of its limit behaviour.

// `!(x > 0.0)` checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fbm;
pub mod gaussian;
pub mod kernels;
pub mod localtime;
pub mod montecarlo;
pub mod seeding;
pub mod statistics;

pub use error::{FracregError, Result};
pub use fbm::{FbmPath, GeneratorKind, HurstParam, PathGenerator};
pub use statistics::{ModelConfig, StatisticSample};
