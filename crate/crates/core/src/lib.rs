//! Deep reinforcement learning for constrained combinatorial design: a PPO
//! learner, a PWR loading-pattern environment, integer-grid benchmark
//! functions, and the sample-efficiency / rank-statistics toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytics;
pub mod benchmark;
pub mod env_core;
pub mod error;
pub mod linalg;
pub mod ppo;
pub mod pwr;
pub mod rng;

pub use error::{Error, Result};
