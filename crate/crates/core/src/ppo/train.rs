//! Collect → GAE → update loop over lockstep parallel workers.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::buffer::RolloutBuffer;
use super::hyper::HyperParams;
use super::loss::{ppo_loss, LossConfig, TrainStats};
use super::net::PolicyValueNet;
use crate::env_core::{BestTracker, Environment, EpisodeEnv, Evaluation, Observation, PolicyStep};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, streams, Rng};

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// Global 1-based index of the episode's last sample.
    pub end_sample: u64,
    pub length: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: u64,
    /// Samples consumed when the update ran.
    pub samples: u64,
    pub learning_rate: f64,
    /// Mean pre-clip gradient norm over the last epoch.
    pub grad_norm: f64,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    /// `-inf` (written as `null`) until something has been evaluated.
    #[serde(with = "neg_inf_as_null")]
    pub objective: f64,
    pub samples_at_best: u64,
    pub payload: Option<serde_json::Value>,
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Completed,
    /// Stopped by the wall-clock cap before the sample budget was used.
    TimeLimit,
    Failed {
        kind: String,
        message: String,
    },
}

/// Everything a run produces; persisted as `run_record.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub hyperparams: HyperParams,
    pub environment: serde_json::Value,
    /// Reward of every sample in global sample order.
    pub rewards: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
    pub updates: Vec<UpdateRecord>,
    pub best: BestRecord,
    pub total_samples: u64,
    pub status: RunStatus,
}

impl RunRecord {
    fn new(algorithm: &str, hp: &HyperParams, environment: serde_json::Value) -> Self {
        Self {
            algorithm: algorithm.into(),
            hyperparams: hp.clone(),
            environment,
            rewards: Vec::new(),
            episodes: Vec::new(),
            updates: Vec::new(),
            best: BestRecord {
                objective: f64::NEG_INFINITY,
                samples_at_best: 0,
                payload: None,
            },
            total_samples: 0,
            status: RunStatus::Completed,
        }
    }

    fn sync_best(&mut self, tracker: &BestTracker) {
        self.best = BestRecord {
            objective: tracker.best_objective,
            samples_at_best: tracker.samples_at_best,
            payload: tracker.best_payload.clone(),
        };
        self.total_samples = tracker.total_samples;
    }

    fn fail(&mut self, e: &Error) {
        let kind = match e {
            Error::Contract(_) => "contract".to_string(),
            Error::Evaluator { kind, .. } => format!("evaluator: {kind}"),
            Error::Numeric(_) => "numeric".to_string(),
            Error::Domain(_) => "domain".to_string(),
            Error::Config(_) => "config".to_string(),
            Error::Io { .. } | Error::Json(_) => "io".to_string(),
        };
        self.status = RunStatus::Failed {
            kind,
            message: e.to_string(),
        };
    }
}

/// A run record plus the error that stopped it, if any. The record is
/// complete up to the failure point.
#[derive(Debug)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub error: Option<Error>,
}

impl TrainOutcome {
    pub fn into_result(self) -> Result<RunRecord> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.record),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Descriptor copied into the run record.
    pub environment: serde_json::Value,
    /// Stop (cleanly, status `time_limit`) once this instant has passed.
    pub deadline: Option<Instant>,
}

struct Worker<E> {
    env: EpisodeEnv<E>,
    rng: Rng,
    obs: Observation,
    ep_rewards: Vec<f64>,
}

/// Seed handed to the environment factory for worker `j`.
pub fn worker_env_seed(seed: u64, j: usize) -> u64 {
    derive_seed(seed, streams::WORKER_ENV + j as u64)
}

fn make_workers<E, F>(hp: &HyperParams, make_env: &F) -> Result<Vec<Worker<E>>>
where
    E: Environment,
    F: Fn(usize, u64) -> Result<E>,
{
    let tracker = BestTracker::new();
    (0..hp.ncores)
        .map(|j| {
            let mut env = EpisodeEnv::new(make_env(j, worker_env_seed(hp.seed, j))?, hp.nf)?;
            let obs = env.reset(&tracker);
            Ok(Worker {
                env,
                rng: stream_rng(hp.seed, streams::WORKER_POLICY + j as u64),
                obs,
                ep_rewards: Vec::new(),
            })
        })
        .collect()
}

/// One lockstep step for every worker. Actions and evaluations run in
/// parallel; commits to the shared tracker happen in worker order, and resets
/// only after every commit of the step, so the outcome is independent of
/// thread scheduling.
fn lockstep<E, A>(
    workers: &mut [Worker<E>],
    tracker: &mut BestTracker,
    record: &mut RunRecord,
    act: A,
    mut store: impl FnMut(usize, &Observation, PolicyStep, f64, bool),
) -> Result<()>
where
    E: Environment,
    A: Fn(usize, &Observation, &mut Rng) -> Result<PolicyStep> + Sync,
{
    let results: Vec<Result<(PolicyStep, Evaluation)>> = workers
        .par_iter_mut()
        .enumerate()
        .map(|(j, w)| {
            let ps = act(j, &w.obs, &mut w.rng)?;
            let ev = w.env.evaluate_action(&ps.action)?;
            Ok((ps, ev))
        })
        .collect();
    let mut finished = Vec::new();
    for (j, res) in results.into_iter().enumerate() {
        let (ps, ev) = res?;
        let w = &mut workers[j];
        let step = w.env.commit(ev, tracker);
        record.rewards.push(step.reward);
        w.ep_rewards.push(step.reward);
        let prev_obs = std::mem::replace(&mut w.obs, step.observation);
        store(j, &prev_obs, ps, step.reward, step.done);
        if step.done {
            let n = w.ep_rewards.len();
            record.episodes.push(EpisodeSummary {
                end_sample: tracker.total_samples,
                length: n,
                mean_reward: w.ep_rewards.iter().sum::<f64>() / n as f64,
                max_reward: w
                    .ep_rewards
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max),
            });
            w.ep_rewards.clear();
            finished.push(j);
        }
    }
    for j in finished {
        workers[j].obs = workers[j].env.reset(tracker);
    }
    Ok(())
}

fn stack(obs: &[&Observation], len: usize) -> Result<Array2<f64>> {
    let mut x = Array2::<f64>::zeros((obs.len(), len));
    for (r, o) in obs.iter().enumerate() {
        if o.len() != len {
            return Err(Error::Contract(format!(
                "observation length {} != {len}",
                o.len()
            )));
        }
        if !o.is_finite() {
            return Err(Error::Numeric("non-finite observation".into()));
        }
        x.row_mut(r)
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(o.values());
    }
    Ok(x)
}

/// Fills a buffer with `n_steps` lockstep steps of every worker.
fn collect_rollout<E: Environment>(
    net: &PolicyValueNet,
    workers: &mut [Worker<E>],
    tracker: &mut BestTracker,
    record: &mut RunRecord,
    n_steps: usize,
) -> Result<RolloutBuffer> {
    let obs_len = net.obs_len();
    let mut buf = RolloutBuffer::new(workers.len(), n_steps, obs_len);
    for p in 0..n_steps {
        // One batched forward pass for all workers; each samples with its own stream.
        let x = stack(&workers.iter().map(|w| &w.obs).collect::<Vec<_>>(), obs_len)?;
        let cache = net.forward(x.view())?;
        let act = |j: usize, _obs: &Observation, rng: &mut Rng| {
            let row = cache.logits.row(j);
            Ok(net.sample_from_logits(
                row.as_slice().expect("contiguous logits"),
                cache.values[j],
                rng,
            ))
        };
        lockstep(workers, tracker, record, act, |j, o, ps, reward, done| {
            buf.store(
                p,
                j,
                o.values(),
                ps.action,
                reward,
                ps.value,
                ps.logprob,
                done,
            );
        })?;
    }
    let x = stack(&workers.iter().map(|w| &w.obs).collect::<Vec<_>>(), obs_len)?;
    buf.last_values = net.values(x.view())?.to_vec();
    Ok(buf)
}

/// `noptepochs` passes of shuffled minibatch Adam steps. Stats are averaged
/// over the last epoch.
pub fn update(
    net: &mut PolicyValueNet,
    adam: &mut Adam,
    buf: &RolloutBuffer,
    hp: &HyperParams,
    lr: f64,
    rng: &mut Rng,
) -> Result<(TrainStats, f64)> {
    let cfg = LossConfig {
        clip_epsilon: hp.clip_epsilon,
        ent_coef: hp.ent_coef,
        vf_coef: hp.vf_coef,
        normalize_advantage: hp.normalize_advantage,
    };
    let mb_size = buf.len() / hp.nminibatches;
    let mut idx: Vec<usize> = (0..buf.len()).collect();
    let mut grad = vec![0.0; net.n_params()];
    let mut last = TrainStats::default();
    let mut last_norm = 0.0;
    for epoch in 0..hp.noptepochs {
        idx.shuffle(rng);
        let mut acc = TrainStats::default();
        let mut norm_acc = 0.0;
        for chunk in idx.chunks(mb_size) {
            let mb = buf.minibatch(chunk);
            let s = ppo_loss(net, &mb, &cfg, &mut grad)?;
            norm_acc += clip_grad_norm(&mut grad, hp.max_grad_norm);
            adam.step(net.params_mut(), &grad, lr);
            acc.loss += s.loss;
            acc.policy_loss += s.policy_loss;
            acc.value_loss += s.value_loss;
            acc.entropy += s.entropy;
            acc.approx_kl += s.approx_kl;
            acc.clipfrac += s.clipfrac;
        }
        if epoch + 1 == hp.noptepochs {
            let n = hp.nminibatches as f64;
            last = TrainStats {
                loss: acc.loss / n,
                policy_loss: acc.policy_loss / n,
                value_loss: acc.value_loss / n,
                entropy: acc.entropy / n,
                approx_kl: acc.approx_kl / n,
                clipfrac: acc.clipfrac / n,
            };
            last_norm = norm_acc / n;
        }
    }
    Ok((last, last_norm))
}

/// Trains PPO on environments built by `make_env(worker_index, env_seed)`.
pub fn train<E, F>(hp: &HyperParams, make_env: F, opts: &TrainOptions) -> TrainOutcome
where
    E: Environment,
    F: Fn(usize, u64) -> Result<E>,
{
    let mut record = RunRecord::new("ppo", hp, opts.environment.clone());
    let mut tracker = BestTracker::new();
    let res = train_inner(hp, &make_env, opts, &mut record, &mut tracker);
    record.sync_best(&tracker);
    if let Err(e) = &res {
        record.fail(e);
    }
    TrainOutcome {
        record,
        error: res.err(),
    }
}

fn train_inner<E, F>(
    hp: &HyperParams,
    make_env: &F,
    opts: &TrainOptions,
    record: &mut RunRecord,
    tracker: &mut BestTracker,
) -> Result<()>
where
    E: Environment,
    F: Fn(usize, u64) -> Result<E>,
{
    hp.validate()?;
    let mut workers = make_workers(hp, make_env)?;
    let spec = workers[0].env.action_spec().clone();
    let obs_len = workers[0].env.observation_len();
    let mut net = PolicyValueNet::new(
        obs_len,
        &spec,
        hp.hidden_width,
        hp.hidden_depth,
        &mut stream_rng(hp.seed, streams::NET_INIT),
    )?;
    let mut adam = Adam::new(net.n_params());
    let mut shuffle_rng = stream_rng(hp.seed, streams::UPDATE_SHUFFLE);
    let n_updates = hp.n_updates();
    for u in 0..n_updates {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            record.status = RunStatus::TimeLimit;
            break;
        }
        let mut buf = collect_rollout(&net, &mut workers, tracker, record, hp.n_steps)?;
        buf.compute_gae(hp.gamma, hp.lambda_gae)?;
        let lr = if hp.anneal_lr {
            hp.learning_rate * (1.0 - u as f64 / n_updates as f64)
        } else {
            hp.learning_rate
        };
        let (stats, grad_norm) = update(&mut net, &mut adam, &buf, hp, lr, &mut shuffle_rng)?;
        record.updates.push(UpdateRecord {
            update: u + 1,
            samples: tracker.total_samples,
            learning_rate: lr,
            grad_norm,
            stats,
        });
        log::debug!(
            "update {}/{} samples {} best {:.6} entropy {:.4} kl {:.2e}",
            u + 1,
            n_updates,
            tracker.total_samples,
            tracker.best_objective,
            stats.entropy,
            stats.approx_kl
        );
    }
    Ok(())
}

/// Uniform random actions with the same worker layout and sample budget as
/// [`train`]; the no-learning baseline.
pub fn random_search<E, F>(hp: &HyperParams, make_env: F, opts: &TrainOptions) -> TrainOutcome
where
    E: Environment,
    F: Fn(usize, u64) -> Result<E>,
{
    let mut record = RunRecord::new("random", hp, opts.environment.clone());
    let mut tracker = BestTracker::new();
    let res = (|| -> Result<()> {
        hp.validate()?;
        let mut workers = make_workers(hp, &make_env)?;
        let spec = workers[0].env.action_spec().clone();
        let policy = crate::env_core::UniformPolicy::new(spec);
        let steps = hp.n_updates() * hp.n_steps as u64;
        for _ in 0..steps {
            if opts.deadline.is_some_and(|d| Instant::now() >= d) {
                record.status = RunStatus::TimeLimit;
                break;
            }
            let act = |_: usize, o: &Observation, rng: &mut Rng| {
                crate::env_core::Policy::act(&policy, o, rng)
            };
            lockstep(
                &mut workers,
                &mut tracker,
                &mut record,
                act,
                |_, _, _, _, _| {},
            )?;
        }
        Ok(())
    })();
    record.sync_best(&tracker);
    if let Err(e) = &res {
        record.fail(e);
    }
    TrainOutcome {
        record,
        error: res.err(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_core::ActionSpec;
    use std::collections::BTreeMap;

    /// Reward is minus the squared distance of the action to a fixed target.
    struct Target {
        spec: ActionSpec,
        target: Vec<usize>,
    }

    impl Environment for Target {
        fn action_spec(&self) -> &ActionSpec {
            &self.spec
        }
        fn observation_len(&self) -> usize {
            self.target.len()
        }
        fn evaluate(&mut self, a: &[usize]) -> Result<Evaluation> {
            let f: f64 = a
                .iter()
                .zip(&self.target)
                .map(|(&x, &t)| (x as f64 - t as f64).powi(2))
                .sum();
            Ok(Evaluation {
                objective: -f,
                observation: Observation(a.iter().map(|&x| x as f64 / 10.0).collect()),
                info: BTreeMap::new(),
                payload: serde_json::json!(a),
            })
        }
    }

    fn make(_: usize, _: u64) -> Result<Target> {
        Ok(Target {
            spec: ActionSpec::new(vec![11, 11]).unwrap(),
            target: vec![7, 2],
        })
    }

    fn small_hp() -> HyperParams {
        HyperParams {
            ncores: 4,
            n_steps: 4,
            total_samples: 2_000,
            hidden_width: 16,
            learning_rate: 3e-3,
            ..HyperParams::default()
        }
    }

    #[test]
    fn sample_accounting_and_episode_count() {
        let hp = HyperParams {
            nf: 3,
            ..small_hp()
        };
        let rec = train(&hp, make, &TrainOptions::default())
            .into_result()
            .unwrap();
        let expected = hp.n_updates() * hp.batch_size() as u64;
        assert_eq!(rec.total_samples, expected);
        assert_eq!(rec.rewards.len() as u64, expected);
        assert_eq!(rec.updates.len() as u64, hp.n_updates());
        let in_episodes: usize = rec.episodes.iter().map(|e| e.length).sum();
        assert!(rec.episodes.iter().all(|e| e.length == 3));
        assert!(expected as usize - in_episodes < 3 * hp.ncores);
    }

    #[test]
    fn deterministic() {
        let a = train(&small_hp(), make, &TrainOptions::default())
            .into_result()
            .unwrap();
        let b = train(&small_hp(), make, &TrainOptions::default())
            .into_result()
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn learns_a_simple_target() {
        let rec = train(&small_hp(), make, &TrainOptions::default())
            .into_result()
            .unwrap();
        assert_eq!(rec.best.objective, 0.0);
        let tail: f64 = rec.rewards[rec.rewards.len() - 200..].iter().sum::<f64>() / 200.0;
        let head: f64 = rec.rewards[..200].iter().sum::<f64>() / 200.0;
        assert!(tail > head, "head {head} tail {tail}");
    }

    #[test]
    fn zero_learning_rate_keeps_policy() {
        let hp = HyperParams {
            learning_rate: 0.0,
            ..small_hp()
        };
        let rec = train(&hp, make, &TrainOptions::default())
            .into_result()
            .unwrap();
        assert!(rec.updates.iter().all(|u| u.stats.approx_kl.abs() < 1e-12));
    }

    #[test]
    fn random_search_uses_same_budget() {
        let hp = small_hp();
        let rec = random_search(&hp, make, &TrainOptions::default())
            .into_result()
            .unwrap();
        assert_eq!(rec.total_samples, hp.n_updates() * hp.batch_size() as u64);
    }

    #[test]
    fn env_error_yields_partial_record() {
        let hp = small_hp();
        let fail = |j: usize, s: u64| -> Result<Box<dyn Environment>> {
            if j == 3 {
                Err(Error::Config("bad".into()))
            } else {
                Ok(Box::new(make(j, s)?))
            }
        };
        let out = train(&hp, fail, &TrainOptions::default());
        assert!(out.error.is_some());
        assert!(matches!(out.record.status, RunStatus::Failed { .. }));
    }
}
