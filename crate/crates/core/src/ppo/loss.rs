//! Clipped surrogate loss and its exact gradient.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::buffer::Minibatch;
use super::net::{categorical_entropy, log_softmax, PolicyValueNet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub clip_epsilon: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub normalize_advantage: bool,
}

/// Diagnostics of one minibatch update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clipfrac: f64,
}

/// Per-sample minibatch advantages, standardized when requested.
pub fn prepare_advantages(adv: &[f64], normalize: bool) -> Vec<f64> {
    if !normalize || adv.is_empty() {
        return adv.to_vec();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// The clipped bound `min(r, clip(r))·A` collapses to this for the active branch.
fn clipped_bound(eps: f64, a: f64) -> f64 {
    if a >= 0.0 {
        (1.0 + eps) * a
    } else {
        (1.0 - eps) * a
    }
}

fn dump(mb: &Minibatch, what: &str) -> Error {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    Error::Numeric(format!(
        "{what}; minibatch of {} samples: advantages finite={}, returns finite={}, old logprobs finite={}, obs finite={}",
        mb.len(),
        finite(&mb.advantages),
        finite(&mb.returns),
        finite(&mb.old_logprobs),
        mb.observations.iter().all(|x| x.is_finite()),
    ))
}

/// Loss value, parameter gradient and diagnostics for one minibatch.
///
/// `grad` is overwritten.
pub fn ppo_loss(
    net: &PolicyValueNet,
    mb: &Minibatch,
    cfg: &LossConfig,
    grad: &mut [f64],
) -> Result<TrainStats> {
    let b = mb.len();
    if b == 0 {
        return Err(Error::Contract("empty minibatch".into()));
    }
    let cache = net.forward(mb.observations.view()).map_err(|e| match e {
        Error::Numeric(m) => dump(mb, &m),
        other => other,
    })?;
    let adv = prepare_advantages(&mb.advantages, cfg.normalize_advantage);
    let bf = b as f64;
    let n_logits = cache.logits.ncols();
    let mut dlogits = Array2::<f64>::zeros((b, n_logits));
    let mut dvalues = Array1::<f64>::zeros(b);
    let (mut pg_sum, mut vf_sum, mut ent_sum, mut kl_sum) = (0.0, 0.0, 0.0, 0.0);
    let mut clipped = 0usize;
    let cards = net.cardinalities().to_vec();
    let offsets = net.offsets().to_vec();
    let mut ls: Vec<Vec<f64>> = cards.iter().map(|&k| vec![0.0; k]).collect();
    let mut ents = vec![0.0; cards.len()];

    for i in 0..b {
        let row = cache.logits.row(i);
        let row = row.as_slice().expect("contiguous logits");
        let mut logp = 0.0;
        let mut h = 0.0;
        for d in 0..cards.len() {
            log_softmax(net.block(row, d), &mut ls[d]);
            logp += ls[d][mb.actions[i][d]];
            ents[d] = categorical_entropy(&ls[d]);
            h += ents[d];
        }
        let ratio = (logp - mb.old_logprobs[i]).exp();
        let a = adv[i];
        let unclipped = ratio * a;
        let bound = clipped_bound(cfg.clip_epsilon, a);
        let active = unclipped <= bound;
        pg_sum += -unclipped.min(bound);
        if (ratio - 1.0).abs() > cfg.clip_epsilon {
            clipped += 1;
        }
        kl_sum += mb.old_logprobs[i] - logp;
        ent_sum += h;
        let v = cache.values[i];
        vf_sum += (v - mb.returns[i]).powi(2);
        dvalues[i] = 2.0 * cfg.vf_coef * (v - mb.returns[i]) / bf;

        let coef = if active { -a * ratio / bf } else { 0.0 };
        let ent_scale = cfg.ent_coef / bf;
        let mut drow = dlogits.row_mut(i);
        for d in 0..cards.len() {
            let o = offsets[d];
            for (c, &l) in ls[d].iter().enumerate() {
                let p = l.exp();
                let ind = if c == mb.actions[i][d] { 1.0 } else { 0.0 };
                drow[o + c] = coef * (ind - p) + ent_scale * p * (l + ents[d]);
            }
        }
    }

    grad.iter_mut().for_each(|g| *g = 0.0);
    net.backward(
        mb.observations.view(),
        &cache,
        dlogits.view(),
        dvalues.view(),
        grad,
    );

    let policy_loss = pg_sum / bf;
    let value_loss = vf_sum / bf;
    let entropy = ent_sum / bf;
    let loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(dump(mb, "non-finite loss or gradient"));
    }
    Ok(TrainStats {
        loss,
        policy_loss,
        value_loss,
        entropy,
        approx_kl: kl_sum / bf,
        clipfrac: clipped as f64 / bf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_core::ActionSpec;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn setup(seed: u64) -> (PolicyValueNet, Minibatch) {
        let mut rng = rng_from_seed(seed);
        let spec = ActionSpec::new(vec![3, 4]).unwrap();
        let net = PolicyValueNet::new(5, &spec, 6, 2, &mut rng).unwrap();
        let b = 7;
        let obs = Array2::from_shape_fn((b, 5), |_| rng.random::<f64>());
        let actions: Vec<Vec<usize>> = (0..b)
            .map(|_| vec![rng.random_range(0..3), rng.random_range(0..4)])
            .collect();
        let (lp, _, _) = net.evaluate_actions(obs.view(), &actions).unwrap();
        let mb = Minibatch {
            observations: obs,
            actions,
            old_logprobs: lp.iter().map(|l| l + rng.random_range(-0.3..0.3)).collect(),
            old_values: vec![0.0; b],
            advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
            returns: (0..b).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        (net, mb)
    }

    #[test]
    fn normalized_advantages_have_zero_mean_unit_std() {
        let a = prepare_advantages(&[1.0, 2.0, 3.0, 10.0], true);
        let m: f64 = a.iter().sum::<f64>() / 4.0;
        let s = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(m.abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-6);
        assert_eq!(prepare_advantages(&[1.0, 2.0], false), vec![1.0, 2.0]);
    }

    #[test]
    fn fresh_snapshot_has_zero_kl_and_no_clipping() {
        let (net, mut mb) = setup(3);
        let (lp, _, _) = net
            .evaluate_actions(mb.observations.view(), &mb.actions)
            .unwrap();
        mb.old_logprobs = lp;
        let cfg = LossConfig {
            clip_epsilon: 0.2,
            ent_coef: 0.01,
            vf_coef: 0.5,
            normalize_advantage: true,
        };
        let mut g = vec![0.0; net.n_params()];
        let s = ppo_loss(&net, &mb, &cfg, &mut g).unwrap();
        assert!(s.approx_kl.abs() < 1e-12);
        assert_eq!(s.clipfrac, 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = LossConfig {
            clip_epsilon: 0.2,
            ent_coef: 0.05,
            vf_coef: 0.7,
            normalize_advantage: true,
        };
        for seed in 0..5 {
            let (net, mb) = setup(seed);
            let mut g = vec![0.0; net.n_params()];
            ppo_loss(&net, &mb, &cfg, &mut g).unwrap();
            let mut scratch = vec![0.0; net.n_params()];
            let h = 1e-6;
            for k in (0..net.n_params()).step_by(3) {
                let mut plus = net.clone();
                plus.params_mut()[k] += h;
                let mut minus = net.clone();
                minus.params_mut()[k] -= h;
                let fp = ppo_loss(&plus, &mb, &cfg, &mut scratch).unwrap().loss;
                let fm = ppo_loss(&minus, &mb, &cfg, &mut scratch).unwrap().loss;
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "seed {seed} param {k}: fd {fd} vs {}",
                    g[k]
                );
            }
        }
    }
}
