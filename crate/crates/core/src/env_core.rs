//! Environment contract: one action builds and evaluates one complete design.
//!
//! Episodes last `nf` designs. Every episode restarts from the embedding of the
//! best design found so far (all zeros before the first evaluation), and a
//! single [`BestTracker`] records that design across all workers.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Per-dimension cardinalities of a multi-discrete action space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    cardinalities: Vec<usize>,
}

impl ActionSpec {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::Contract(
                "action spec needs at least one dimension".into(),
            ));
        }
        if let Some(i) = cardinalities.iter().position(|&c| c == 0) {
            return Err(Error::Contract(format!(
                "action dimension {i} has cardinality 0"
            )));
        }
        Ok(Self { cardinalities })
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn len(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinalities.is_empty()
    }

    /// Sum of cardinalities, i.e. the number of logits a policy must emit.
    pub fn total_choices(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    pub fn validate(&self, action: &[usize]) -> Result<()> {
        if action.len() != self.cardinalities.len() {
            return Err(Error::Contract(format!(
                "action has {} components, expected {}",
                action.len(),
                self.cardinalities.len()
            )));
        }
        for (i, (&a, &c)) in action.iter().zip(&self.cardinalities).enumerate() {
            if a >= c {
                return Err(Error::Contract(format!(
                    "action component {i} = {a} outside [0, {c})"
                )));
            }
        }
        Ok(())
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<usize> {
        self.cardinalities
            .iter()
            .map(|&c| rng.random_range(0..c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn zeros(len: usize) -> Self {
        Observation(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Outcome of decoding and scoring one action.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Objective value; higher is better.
    pub objective: f64,
    /// Embedding of the evaluated design.
    pub observation: Observation,
    pub info: BTreeMap<String, f64>,
    /// Environment-specific record of the design itself.
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<String, f64>,
}

/// A design problem whose every action is a complete candidate.
pub trait Environment: Send {
    fn action_spec(&self) -> &ActionSpec;

    fn observation_len(&self) -> usize;

    /// Decodes and evaluates a validated action.
    fn evaluate(&mut self, action: &[usize]) -> Result<Evaluation>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn action_spec(&self) -> &ActionSpec {
        (**self).action_spec()
    }

    fn observation_len(&self) -> usize {
        (**self).observation_len()
    }

    fn evaluate(&mut self, action: &[usize]) -> Result<Evaluation> {
        (**self).evaluate(action)
    }
}

/// Best design ever evaluated, shared by every worker of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestTracker {
    pub best_objective: f64,
    pub best_observation: Option<Observation>,
    pub best_payload: Option<serde_json::Value>,
    /// 1-based index of the sample that produced the best design (0 if none).
    pub samples_at_best: u64,
    pub total_samples: u64,
}

impl Default for BestTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl BestTracker {
    pub fn new() -> Self {
        Self {
            best_objective: f64::NEG_INFINITY,
            best_observation: None,
            best_payload: None,
            samples_at_best: 0,
            total_samples: 0,
        }
    }

    /// Counts one evaluated sample; returns true if it became the new best.
    /// Ties keep the earlier design.
    pub fn record(&mut self, eval: &Evaluation) -> bool {
        self.total_samples += 1;
        if eval.objective > self.best_objective {
            self.best_objective = eval.objective;
            self.best_observation = Some(eval.observation.clone());
            self.best_payload = Some(eval.payload.clone());
            self.samples_at_best = self.total_samples;
            true
        } else {
            false
        }
    }

    pub fn has_best(&self) -> bool {
        self.best_observation.is_some()
    }
}

/// Wraps an environment with the episode counter and restart-from-best reset.
pub struct EpisodeEnv<E> {
    env: E,
    nf: usize,
    step_in_episode: usize,
}

impl<E: Environment> EpisodeEnv<E> {
    pub fn new(env: E, nf: usize) -> Result<Self> {
        if nf == 0 {
            return Err(Error::Contract("NF must be at least 1".into()));
        }
        Ok(Self {
            env,
            nf,
            step_in_episode: 0,
        })
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn action_spec(&self) -> &ActionSpec {
        self.env.action_spec()
    }

    pub fn observation_len(&self) -> usize {
        self.env.observation_len()
    }

    pub fn step_in_episode(&self) -> usize {
        self.step_in_episode
    }

    pub fn reset(&mut self, tracker: &BestTracker) -> Observation {
        self.step_in_episode = 0;
        match &tracker.best_observation {
            Some(obs) => obs.clone(),
            None => Observation::zeros(self.env.observation_len()),
        }
    }

    /// First half of a step: validate and evaluate without touching shared state.
    pub fn evaluate_action(&mut self, action: &[usize]) -> Result<Evaluation> {
        self.env.action_spec().validate(action)?;
        let eval = self.env.evaluate(action)?;
        if !eval.objective.is_finite() {
            return Err(Error::Numeric(format!(
                "environment returned non-finite objective {}",
                eval.objective
            )));
        }
        Ok(eval)
    }

    /// Second half of a step: record the evaluation and advance the episode.
    pub fn commit(&mut self, eval: Evaluation, tracker: &mut BestTracker) -> StepResult {
        tracker.record(&eval);
        self.step_in_episode += 1;
        StepResult {
            observation: eval.observation,
            reward: eval.objective,
            done: self.step_in_episode == self.nf,
            info: eval.info,
        }
    }

    pub fn step(&mut self, action: &[usize], tracker: &mut BestTracker) -> Result<StepResult> {
        let eval = self.evaluate_action(action)?;
        Ok(self.commit(eval, tracker))
    }
}

/// Output of a policy for one observation.
#[derive(Debug, Clone)]
pub struct PolicyStep {
    pub action: Vec<usize>,
    pub logprob: f64,
    pub value: f64,
    pub entropy: f64,
}

pub trait Policy {
    fn act(&self, obs: &Observation, rng: &mut Rng) -> Result<PolicyStep>;
}

/// Uniform sampling over the action space; the no-learning baseline.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    spec: ActionSpec,
}

impl UniformPolicy {
    pub fn new(spec: ActionSpec) -> Self {
        Self { spec }
    }
}

impl Policy for UniformPolicy {
    fn act(&self, _obs: &Observation, rng: &mut Rng) -> Result<PolicyStep> {
        let log_n: f64 = self
            .spec
            .cardinalities()
            .iter()
            .map(|&c| (c as f64).ln())
            .sum();
        Ok(PolicyStep {
            action: self.spec.sample_uniform(rng),
            logprob: -log_n,
            value: 0.0,
            entropy: log_n,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Observation,
    pub action: Vec<usize>,
    pub logprob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Plays one full episode of `nf` designs from a fresh reset.
pub fn run_episode<P, E>(
    policy: &P,
    env: &mut EpisodeEnv<E>,
    tracker: &mut BestTracker,
    rng: &mut Rng,
) -> Result<Vec<Transition>>
where
    P: Policy + ?Sized,
    E: Environment,
{
    let mut obs = env.reset(tracker);
    let mut out = Vec::with_capacity(env.nf());
    loop {
        let ps = policy.act(&obs, rng)?;
        let step = env.step(&ps.action, tracker)?;
        out.push(Transition {
            observation: obs,
            action: ps.action,
            logprob: ps.logprob,
            value: ps.value,
            reward: step.reward,
            done: step.done,
        });
        if step.done {
            return Ok(out);
        }
        obs = step.observation;
    }
}
