//! Rollout storage and generalized advantage estimation.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Transitions from `n_workers` workers over `n_steps` lockstep steps.
/// Flat index of (step, worker) is `step * n_workers + worker`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub n_workers: usize,
    pub n_steps: usize,
    pub obs_len: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub logprobs: Vec<f64>,
    /// True when the transition ended its episode.
    pub dones: Vec<bool>,
    /// Value of each worker's observation after the last step (bootstrap).
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_workers: usize, n_steps: usize, obs_len: usize) -> Self {
        let n = n_workers * n_steps;
        Self {
            n_workers,
            n_steps,
            obs_len,
            observations: vec![0.0; n * obs_len],
            actions: vec![Vec::new(); n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            logprobs: vec![0.0; n],
            dones: vec![false; n],
            last_values: vec![0.0; n_workers],
            advantages: vec![0.0; n],
            returns: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.n_workers * self.n_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, step: usize, worker: usize) -> usize {
        step * self.n_workers + worker
    }

    #[allow(clippy::too_many_arguments)]
    pub fn store(
        &mut self,
        step: usize,
        worker: usize,
        obs: &[f64],
        action: Vec<usize>,
        reward: f64,
        value: f64,
        logprob: f64,
        done: bool,
    ) {
        let i = self.index(step, worker);
        self.observations[i * self.obs_len..(i + 1) * self.obs_len].copy_from_slice(obs);
        self.actions[i] = action;
        self.rewards[i] = reward;
        self.values[i] = value;
        self.logprobs[i] = logprob;
        self.dones[i] = done;
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_len..(i + 1) * self.obs_len]
    }

    /// Per-worker backward GAE recursion. A transition that ends an episode
    /// neither bootstraps nor propagates: its advantage is exactly `r - V(s)`.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        for w in 0..self.n_workers {
            let mut next_adv = 0.0;
            for t in (0..self.n_steps).rev() {
                let i = self.index(t, w);
                let adv = if self.dones[i] {
                    self.rewards[i] - self.values[i]
                } else {
                    let next_value = if t + 1 == self.n_steps {
                        self.last_values[w]
                    } else {
                        self.values[self.index(t + 1, w)]
                    };
                    let delta = self.rewards[i] + gamma * next_value - self.values[i];
                    // The last step has no stored successor; its bootstrap is in delta.
                    if t + 1 == self.n_steps {
                        delta
                    } else {
                        delta + gamma * lambda * next_adv
                    }
                };
                self.advantages[i] = adv;
                self.returns[i] = adv + self.values[i];
                next_adv = adv;
            }
        }
        if self
            .advantages
            .iter()
            .chain(&self.returns)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("non-finite advantage or return".into()));
        }
        Ok(())
    }

    /// Gathers a minibatch of the given flat indices.
    pub fn minibatch(&self, idx: &[usize]) -> Minibatch {
        let mut obs = Array2::<f64>::zeros((idx.len(), self.obs_len));
        for (r, &i) in idx.iter().enumerate() {
            obs.row_mut(r)
                .as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(self.observation(i));
        }
        Minibatch {
            observations: obs,
            actions: idx.iter().map(|&i| self.actions[i].clone()).collect(),
            old_logprobs: idx.iter().map(|&i| self.logprobs[i]).collect(),
            old_values: idx.iter().map(|&i| self.values[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minibatch {
    pub observations: Array2<f64>,
    pub actions: Vec<Vec<usize>>,
    pub old_logprobs: Vec<f64>,
    pub old_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(
        n_workers: usize,
        n_steps: usize,
        rewards: &[f64],
        values: &[f64],
        dones: &[bool],
    ) -> RolloutBuffer {
        let mut b = RolloutBuffer::new(n_workers, n_steps, 1);
        for t in 0..n_steps {
            for w in 0..n_workers {
                let i = b.index(t, w);
                b.store(t, w, &[0.0], vec![0], rewards[i], values[i], 0.0, dones[i]);
            }
        }
        b
    }

    #[test]
    fn episode_length_one_gives_reward_minus_value() {
        let r = [1.5, -2.0, 0.25, 7.0];
        let v = [0.5, 1.0, -0.75, 3.0];
        let mut b = filled(2, 2, &r, &v, &[true; 4]);
        b.last_values = vec![100.0, -100.0];
        b.compute_gae(0.99, 0.95).unwrap();
        for i in 0..4 {
            assert_eq!(b.advantages[i], r[i] - v[i]);
            assert_eq!(b.returns[i], b.advantages[i] + v[i]);
        }
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, 2.0, 3.0];
        let v = [0.5, 0.25, 0.125];
        let mut b = filled(1, 3, &r, &v, &[false; 3]);
        b.last_values = vec![2.0];
        b.compute_gae(0.9, 0.0).unwrap();
        assert!((b.advantages[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-15);
        assert!((b.advantages[1] - (2.0 + 0.9 * 0.125 - 0.25)).abs() < 1e-15);
        assert!((b.advantages[2] - (3.0 + 0.9 * 2.0 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn full_lambda_matches_discounted_return() {
        // lambda = 1 and an episode that ends at the last step: A_t = G_t - V_t.
        let r = [1.0, -1.0, 4.0];
        let v = [0.3, 0.2, 0.1];
        let mut b = filled(1, 3, &r, &v, &[false, false, true]);
        let g = 0.5;
        b.compute_gae(g, 1.0).unwrap();
        let g2 = 4.0;
        let g1 = -1.0 + g * g2;
        let g0 = 1.0 + g * g1;
        assert!((b.advantages[0] - (g0 - 0.3)).abs() < 1e-14);
        assert!((b.advantages[1] - (g1 - 0.2)).abs() < 1e-14);
        assert!((b.advantages[2] - (g2 - 0.1)).abs() < 1e-14);
    }

    #[test]
    fn episode_boundary_stops_propagation() {
        let r = [1.0, 10.0];
        let v = [0.0, 0.0];
        let mut b = filled(1, 2, &r, &v, &[true, false]);
        b.last_values = vec![0.0];
        b.compute_gae(0.99, 0.95).unwrap();
        assert_eq!(b.advantages[0], 1.0);
    }

    #[test]
    fn workers_do_not_mix() {
        // Worker 0 always terminal, worker 1 never; flat layout is step-major.
        let r = [1.0, 1.0, 1.0, 1.0];
        let v = [0.0; 4];
        let mut b = filled(2, 2, &r, &v, &[true, false, true, false]);
        b.last_values = vec![0.0, 0.0];
        b.compute_gae(1.0, 1.0).unwrap();
        assert_eq!(b.advantages[0], 1.0);
        assert_eq!(b.advantages[2], 1.0);
        assert_eq!(b.advantages[3], 1.0);
        assert_eq!(b.advantages[1], 2.0);
    }
}
