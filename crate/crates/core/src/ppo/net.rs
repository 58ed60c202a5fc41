//! Policy/value network with hand-derived reverse-mode gradients.
//!
//! Layout: the observation is flattened and fed to two separate tanh towers
//! of `depth` layers of `width` units. The policy tower ends in one logit
//! block per action dimension; the value tower ends in a scalar. All
//! parameters live in one flat vector so the optimizer, gradient clipping and
//! finite-difference checks can treat them uniformly.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env_core::{ActionSpec, Observation, Policy, PolicyStep};
use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::rng::Rng;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const POLICY_HEAD_GAIN: f64 = 0.01;
const VALUE_HEAD_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Dense {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

impl Dense {
    fn size(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValueNet {
    obs_len: usize,
    width: usize,
    depth: usize,
    cardinalities: Vec<usize>,
    /// Start of each dimension's logit block.
    offsets: Vec<usize>,
    pi_tower: Vec<Dense>,
    pi_head: Dense,
    v_tower: Vec<Dense>,
    v_head: Dense,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass for the backward pass.
pub struct ForwardCache {
    pi_acts: Vec<Array2<f64>>,
    v_acts: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
}

fn w_view<'a>(params: &'a [f64], d: &Dense) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape(
        (d.inputs, d.outputs),
        &params[d.w..d.w + d.inputs * d.outputs],
    )
    .expect("layer shape")
}

fn b_view<'a>(params: &'a [f64], d: &Dense) -> ArrayView1<'a, f64> {
    ArrayView1::from(&params[d.b..d.b + d.outputs])
}

fn affine(x: &ArrayView2<f64>, params: &[f64], d: &Dense) -> Array2<f64> {
    let mut z = Array2::<f64>::zeros((x.nrows(), d.outputs));
    general_mat_mul(1.0, x, &w_view(params, d), 0.0, &mut z);
    z += &b_view(params, d);
    z
}

/// Writes dW = xᵀ·dz and db = Σ rows dz into `grad`, returns dx = dz·Wᵀ if asked.
fn affine_backward(
    x: &ArrayView2<f64>,
    dz: &ArrayView2<f64>,
    params: &[f64],
    grad: &mut [f64],
    d: &Dense,
    want_dx: bool,
) -> Option<Array2<f64>> {
    {
        let gw = &mut grad[d.w..d.w + d.inputs * d.outputs];
        let mut gw = ArrayViewMut2::from_shape((d.inputs, d.outputs), gw).expect("layer shape");
        general_mat_mul(1.0, &x.t(), dz, 1.0, &mut gw);
    }
    for (g, s) in grad[d.b..d.b + d.outputs]
        .iter_mut()
        .zip(dz.sum_axis(Axis(0)).iter())
    {
        *g += s;
    }
    want_dx.then(|| {
        let mut dx = Array2::<f64>::zeros((dz.nrows(), d.inputs));
        general_mat_mul(1.0, dz, &w_view(params, d).t(), 0.0, &mut dx);
        dx
    })
}

/// Log-softmax of one logit block, numerically stable.
pub fn log_softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = z - lse;
    }
}

/// Entropy of a categorical distribution given its log-probabilities.
pub fn categorical_entropy(logp: &[f64]) -> f64 {
    -logp
        .iter()
        .map(|&l| {
            let p = l.exp();
            if p > 0.0 {
                p * l
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

impl PolicyValueNet {
    pub fn new(
        obs_len: usize,
        spec: &ActionSpec,
        width: usize,
        depth: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if width == 0 || depth == 0 || obs_len == 0 {
            return Err(Error::Contract(format!(
                "network needs obs_len, width and depth >= 1 (got {obs_len}, {width}, {depth})"
            )));
        }
        let cardinalities = spec.cardinalities().to_vec();
        let mut offsets = Vec::with_capacity(cardinalities.len());
        let mut acc = 0;
        for &c in &cardinalities {
            offsets.push(acc);
            acc += c;
        }
        let n_logits = acc;

        let mut cursor = 0usize;
        let mut dense = |inputs: usize, outputs: usize| {
            let d = Dense {
                w: cursor,
                b: cursor + inputs * outputs,
                inputs,
                outputs,
            };
            cursor += d.size();
            d
        };
        let mut pi_tower = Vec::with_capacity(depth);
        for l in 0..depth {
            pi_tower.push(dense(if l == 0 { obs_len } else { width }, width));
        }
        let pi_head = dense(width, n_logits);
        let mut v_tower = Vec::with_capacity(depth);
        for l in 0..depth {
            v_tower.push(dense(if l == 0 { obs_len } else { width }, width));
        }
        let v_head = dense(width, 1);

        let mut net = Self {
            obs_len,
            width,
            depth,
            cardinalities,
            offsets,
            pi_tower,
            pi_head,
            v_tower,
            v_head,
            params: vec![0.0; cursor],
        };
        net.initialize(rng);
        Ok(net)
    }

    /// Orthogonal weights scaled per layer role, zero biases.
    fn initialize(&mut self, rng: &mut Rng) {
        let layers: Vec<(Dense, f64)> = self
            .pi_tower
            .iter()
            .map(|d| (*d, HIDDEN_GAIN))
            .chain(std::iter::once((self.pi_head, POLICY_HEAD_GAIN)))
            .chain(self.v_tower.iter().map(|d| (*d, HIDDEN_GAIN)))
            .chain(std::iter::once((self.v_head, VALUE_HEAD_GAIN)))
            .collect();
        for (d, gain) in layers {
            let w = random_orthonormal(d.inputs, d.outputs, rng);
            for (p, x) in self.params[d.w..d.w + d.inputs * d.outputs]
                .iter_mut()
                .zip(w)
            {
                *p = gain * x;
            }
            self.params[d.b..d.b + d.outputs]
                .iter_mut()
                .for_each(|p| *p = 0.0);
        }
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn head_widths(&self) -> Vec<usize> {
        self.cardinalities.clone()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Logit block of dimension `d` within a row of logits.
    pub fn block<'a>(&self, row: &'a [f64], d: usize) -> &'a [f64] {
        let o = self.offsets[d];
        &row[o..o + self.cardinalities[d]]
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.obs_len {
            return Err(Error::Contract(format!(
                "observation length {} does not match network input {}",
                x.ncols(),
                self.obs_len
            )));
        }
        let tower = |layers: &[Dense]| {
            let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
            for d in layers {
                let input = acts.last().map(|a| a.view()).unwrap_or(x.view());
                let mut z = affine(&input, &self.params, d);
                z.mapv_inplace(f64::tanh);
                acts.push(z);
            }
            acts
        };
        let pi_acts = tower(&self.pi_tower);
        let v_acts = tower(&self.v_tower);
        let logits = affine(
            &pi_acts.last().expect("depth >= 1").view(),
            &self.params,
            &self.pi_head,
        );
        let values = affine(
            &v_acts.last().expect("depth >= 1").view(),
            &self.params,
            &self.v_head,
        )
        .column(0)
        .to_owned();
        if logits.iter().any(|v| !v.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "network produced non-finite logits or values".into(),
            ));
        }
        Ok(ForwardCache {
            pi_acts,
            v_acts,
            logits,
            values,
        })
    }

    /// Accumulates parameter gradients given loss derivatives with respect to
    /// the logits (batch × total logits) and the values (batch).
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        cache: &ForwardCache,
        dlogits: ArrayView2<f64>,
        dvalues: ArrayView1<f64>,
        grad: &mut [f64],
    ) {
        assert_eq!(grad.len(), self.params.len());
        let tower_back = |layers: &[Dense],
                          acts: &[Array2<f64>],
                          head: &Dense,
                          dout: ArrayView2<f64>,
                          grad: &mut [f64]| {
            let top = acts.last().expect("depth >= 1");
            let mut dact = affine_backward(&top.view(), &dout, &self.params, grad, head, true)
                .expect("requested dx");
            for l in (0..layers.len()).rev() {
                let mut dz = dact;
                dz.zip_mut_with(&acts[l], |g, &a| *g *= 1.0 - a * a);
                let input = if l == 0 { x.view() } else { acts[l - 1].view() };
                match affine_backward(&input, &dz.view(), &self.params, grad, &layers[l], l > 0) {
                    Some(dx) => dact = dx,
                    None => break,
                }
            }
        };
        tower_back(&self.pi_tower, &cache.pi_acts, &self.pi_head, dlogits, grad);
        let dv = dvalues.insert_axis(Axis(1));
        tower_back(&self.v_tower, &cache.v_acts, &self.v_head, dv, grad);
    }

    /// Value estimates for a batch of observations.
    pub fn values(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.values)
    }

    /// Draws one action. Log-probability and entropy are summed over dimensions.
    pub fn sample_action(&self, obs: &Observation, rng: &mut Rng) -> Result<PolicyStep> {
        if !obs.is_finite() {
            return Err(Error::Numeric("non-finite observation".into()));
        }
        let x = ArrayView2::from_shape((1, obs.len()), obs.values())
            .map_err(|e| Error::Contract(e.to_string()))?;
        let cache = self.forward(x)?;
        let row = cache.logits.row(0);
        Ok(self.sample_from_logits(
            row.as_slice().expect("contiguous logits"),
            cache.values[0],
            rng,
        ))
    }

    /// Samples every categorical head of one logit row by inverse CDF.
    pub fn sample_from_logits(&self, row: &[f64], value: f64, rng: &mut Rng) -> PolicyStep {
        let mut action = Vec::with_capacity(self.cardinalities.len());
        let mut logprob = 0.0;
        let mut entropy = 0.0;
        let mut buf = Vec::new();
        for d in 0..self.cardinalities.len() {
            let block = self.block(row, d);
            buf.resize(block.len(), 0.0);
            log_softmax(block, &mut buf);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut choice = None;
            for (c, &l) in buf.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    choice = Some(c);
                    break;
                }
            }
            // Rounding can leave the cumulative sum just below u.
            let choice =
                choice.unwrap_or_else(|| buf.iter().rposition(|l| l.exp() > 0.0).unwrap_or(0));
            action.push(choice);
            logprob += buf[choice];
            entropy += categorical_entropy(&buf);
        }
        PolicyStep {
            action,
            logprob,
            value,
            entropy,
        }
    }

    /// Log-probability and entropy of given actions under the current policy.
    pub fn evaluate_actions(
        &self,
        x: ArrayView2<f64>,
        actions: &[Vec<usize>],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let cache = self.forward(x)?;
        let mut logps = Vec::with_capacity(actions.len());
        let mut ents = Vec::with_capacity(actions.len());
        let mut buf = Vec::new();
        for (i, a) in actions.iter().enumerate() {
            let row = cache.logits.row(i);
            let row = row.as_slice().expect("contiguous logits");
            let mut lp = 0.0;
            let mut h = 0.0;
            for d in 0..self.cardinalities.len() {
                let block = self.block(row, d);
                buf.resize(block.len(), 0.0);
                log_softmax(block, &mut buf);
                lp += buf[a[d]];
                h += categorical_entropy(&buf);
            }
            logps.push(lp);
            ents.push(h);
        }
        Ok((logps, ents, cache.values.to_vec()))
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

impl Policy for PolicyValueNet {
    fn act(&self, obs: &Observation, rng: &mut Rng) -> Result<PolicyStep> {
        self.sample_action(obs, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn spec(c: &[usize]) -> ActionSpec {
        ActionSpec::new(c.to_vec()).unwrap()
    }

    #[test]
    fn default_architecture_shapes() {
        let net = PolicyValueNet::new(10, &spec(&[3, 5]), 64, 2, &mut rng_from_seed(0)).unwrap();
        // pi: 10*64+64 + 64*64+64 + 64*8+8 ; v: same towers + 64+1
        let tower = 10 * 64 + 64 + 64 * 64 + 64;
        assert_eq!(net.n_params(), 2 * tower + 64 * 8 + 8 + 64 + 1);
        assert_eq!(net.head_widths(), vec![3, 5]);
    }

    #[test]
    fn deep_narrow_variant() {
        let net = PolicyValueNet::new(4, &spec(&[2]), 32, 4, &mut rng_from_seed(0)).unwrap();
        let tower = 4 * 32 + 32 + 3 * (32 * 32 + 32);
        assert_eq!(net.n_params(), 2 * tower + 32 * 2 + 2 + 32 + 1);
        assert_eq!(net.depth(), 4);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = PolicyValueNet::new(6, &spec(&[4, 4]), 16, 2, &mut rng_from_seed(9)).unwrap();
        let b = PolicyValueNet::new(6, &spec(&[4, 4]), 16, 2, &mut rng_from_seed(9)).unwrap();
        let c = PolicyValueNet::new(6, &spec(&[4, 4]), 16, 2, &mut rng_from_seed(10)).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn zero_width_rejected() {
        assert!(PolicyValueNet::new(3, &spec(&[2]), 0, 2, &mut rng_from_seed(0)).is_err());
        assert!(PolicyValueNet::new(3, &spec(&[2]), 4, 0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn uniform_logits_give_log_k_entropy() {
        let mut buf = vec![0.0; 7];
        log_softmax(&[0.3; 7], &mut buf);
        assert!((categorical_entropy(&buf) - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn dominant_logit_is_deterministic() {
        let mut buf = vec![0.0; 4];
        log_softmax(&[0.0, 1e6, 0.0, 0.0], &mut buf);
        assert_eq!(buf[1], 0.0);
        assert_eq!(categorical_entropy(&buf), 0.0);
    }

    #[test]
    fn sampled_logprob_matches_evaluation() {
        let net = PolicyValueNet::new(5, &spec(&[3, 4, 2]), 8, 2, &mut rng_from_seed(1)).unwrap();
        let mut rng = rng_from_seed(2);
        let obs = Observation(vec![0.1, -0.4, 0.9, 0.0, 0.3]);
        for _ in 0..20 {
            let s = net.sample_action(&obs, &mut rng).unwrap();
            let x = ArrayView2::from_shape((1, 5), obs.values()).unwrap();
            let (lp, h, v) = net
                .evaluate_actions(x, std::slice::from_ref(&s.action))
                .unwrap();
            assert!((lp[0] - s.logprob).abs() < 1e-12);
            assert!((h[0] - s.entropy).abs() < 1e-12);
            assert!((v[0] - s.value).abs() < 1e-12);
        }
    }

    #[test]
    fn fresh_policy_is_near_uniform() {
        let net = PolicyValueNet::new(5, &spec(&[10, 20]), 64, 2, &mut rng_from_seed(1)).unwrap();
        let s = net
            .sample_action(&Observation(vec![0.5; 5]), &mut rng_from_seed(0))
            .unwrap();
        let max_h = 10f64.ln() + 20f64.ln();
        assert!(s.entropy <= max_h + 1e-12);
        assert!(max_h - s.entropy < 1e-2);
    }

    #[test]
    fn rejects_wrong_observation_length() {
        let net = PolicyValueNet::new(5, &spec(&[2]), 4, 1, &mut rng_from_seed(0)).unwrap();
        let err = net
            .sample_action(&Observation(vec![0.0; 4]), &mut rng_from_seed(0))
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn non_finite_observation_is_numeric_error() {
        let net = PolicyValueNet::new(2, &spec(&[2]), 4, 1, &mut rng_from_seed(0)).unwrap();
        let err = net
            .sample_action(&Observation(vec![f64::NAN, 0.0]), &mut rng_from_seed(0))
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }
}
