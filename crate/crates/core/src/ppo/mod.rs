//! Proximal policy optimization over multi-discrete action spaces.

pub mod adam;
pub mod buffer;
pub mod hyper;
pub mod loss;
pub mod net;
pub mod train;

pub use buffer::{Minibatch, RolloutBuffer};
pub use hyper::HyperParams;
pub use loss::{ppo_loss, LossConfig, TrainStats};
pub use net::PolicyValueNet;
pub use train::{random_search, train, RunRecord, RunStatus, TrainOptions, TrainOutcome};
