use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PPO and episode knobs. Defaults are the tuned values (NF = 1, n_steps = 4,
/// ent_coef = 0.001) together with the untouched toolkit defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub n_steps: usize,
    pub ncores: usize,
    /// Designs per episode.
    pub nf: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub noptepochs: usize,
    pub nminibatches: usize,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub lambda_gae: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub total_samples: u64,
    pub seed: u64,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub normalize_advantage: bool,
    /// Linear decay of the learning rate to zero over the run.
    pub anneal_lr: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_steps: 4,
            ncores: 32,
            nf: 1,
            ent_coef: 0.001,
            vf_coef: 1.0,
            noptepochs: 10,
            nminibatches: 4,
            clip_epsilon: 0.2,
            gamma: 0.99,
            lambda_gae: 0.95,
            learning_rate: 0.00025,
            max_grad_norm: 0.5,
            total_samples: 40_000,
            seed: 0,
            hidden_width: 64,
            hidden_depth: 2,
            normalize_advantage: true,
            anneal_lr: false,
        }
    }
}

impl HyperParams {
    pub fn batch_size(&self) -> usize {
        self.n_steps * self.ncores
    }

    pub fn minibatch_size(&self) -> usize {
        self.batch_size() / self.nminibatches
    }

    /// Number of collect/update iterations that fit in `total_samples`.
    pub fn n_updates(&self) -> u64 {
        self.total_samples / self.batch_size() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_steps == 0 || self.ncores == 0 || self.nf == 0 {
            return bad("n_steps, ncores and nf must be positive".into());
        }
        if self.noptepochs == 0 || self.nminibatches == 0 {
            return bad("noptepochs and nminibatches must be positive".into());
        }
        if !self.batch_size().is_multiple_of(self.nminibatches) {
            return bad(format!(
                "nminibatches = {} does not divide n_steps * ncores = {}",
                self.nminibatches,
                self.batch_size()
            ));
        }
        if !(self.clip_epsilon > 0.0) {
            return bad(format!(
                "clip_epsilon must be > 0, got {}",
                self.clip_epsilon
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda_gae) {
            return bad("gamma and lambda_gae must lie in [0, 1]".into());
        }
        if !(self.learning_rate >= 0.0) || !(self.max_grad_norm >= 0.0) {
            return bad("learning_rate and max_grad_norm must be >= 0".into());
        }
        if !(self.ent_coef >= 0.0) || !(self.vf_coef >= 0.0) {
            return bad("ent_coef and vf_coef must be >= 0".into());
        }
        if self.hidden_width == 0 || self.hidden_depth == 0 {
            return bad("hidden_width and hidden_depth must be >= 1".into());
        }
        if self.n_updates() == 0 {
            return bad(format!(
                "total_samples = {} is smaller than one rollout of {} samples",
                self.total_samples,
                self.batch_size()
            ));
        }
        Ok(())
    }
}
