//! The decider: featurization, a small tanh MLP with policy and value heads,
//! masked softmax, and the hand-written backward pass PPO trains through.
//!
//! Every event is embedded as the sum of a subject, a verb and an object
//! embedding; the history is mean-pooled and concatenated with the dense
//! features (belief marginals, win-rate target, phase, own role and seat,
//! liveness).

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ActionMask, Event, Object, PlayerId, Role, StateView, Verb, ACTION_SPACE, NUM_PLAYERS, NUM_ROLES, SYSTEM};
use crate::error::{DataError, PolicyError};
use crate::predictor::Belief;

pub const SUBJECT_SLOTS: usize = NUM_PLAYERS + 1;
pub const VERB_SLOTS: usize = 10;
/// Players, role names, `none`, and one reserved slot.
pub const OBJECT_SLOTS: usize = 16;
pub const MASK_PENALTY: f64 = 1e9;

/// Belief 9x5, target, phase, role, seat, liveness.
pub const DENSE_DIM: usize = NUM_PLAYERS * NUM_ROLES + 1 + 8 + NUM_ROLES + NUM_PLAYERS + NUM_PLAYERS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub embed: usize,
    pub hidden: usize,
    pub dense: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            embed: 16,
            hidden: 64,
            dense: DENSE_DIM,
        }
    }
}

impl NetConfig {
    pub fn input_dim(&self) -> usize {
        self.embed + self.dense
    }

    fn layout(&self) -> Layout {
        let (e, h, d) = (self.embed, self.hidden, self.input_dim());
        let mut off = 0;
        let mut take = |n: usize| {
            let start = off;
            off += n;
            start
        };
        Layout {
            subj: take(SUBJECT_SLOTS * e),
            verb: take(VERB_SLOTS * e),
            obj: take(OBJECT_SLOTS * e),
            w1: take(h * d),
            b1: take(h),
            w2: take(h * h),
            b2: take(h),
            wp: take(ACTION_SPACE * h),
            bp: take(ACTION_SPACE),
            wv: take(h),
            bv: take(1),
            total: off,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    subj: usize,
    verb: usize,
    obj: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    total: usize,
}

/// Token ids of one event.
pub fn encode_event(e: &Event) -> [u16; 3] {
    let subject = if e.subject == SYSTEM || e.subject as usize >= NUM_PLAYERS {
        NUM_PLAYERS
    } else {
        e.subject as usize
    };
    let object = match e.object {
        Object::Player(p) if (p as usize) < NUM_PLAYERS => p as usize,
        Object::Player(_) => OBJECT_SLOTS - 1,
        Object::Role(r) => NUM_PLAYERS + r.index(),
        Object::None => NUM_PLAYERS + NUM_ROLES,
    };
    [subject as u16, e.verb.index() as u16, object as u16]
}

/// Closed-vocabulary lookup for verbs arriving as text.
pub fn verb_token(s: &str) -> Result<Verb, PolicyError> {
    s.parse().map_err(|_| PolicyError::UnknownVerb(s.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub tokens: Vec<[u16; 3]>,
    pub dense: Vec<f64>,
}

/// Observer-visible features.
pub fn featurize(view: &StateView, belief: &Belief, wr_cons: f64) -> FeatureVector {
    featurize_marginals(view, belief.marginals(), wr_cons)
}

/// Same as [`featurize`] with explicit marginals, e.g. an uninformed prior.
pub fn featurize_marginals(view: &StateView, marginals: &[[f64; NUM_ROLES]], wr_cons: f64) -> FeatureVector {
    let tokens = view.events.iter().map(encode_event).collect();
    let mut dense = Vec::with_capacity(DENSE_DIM);
    for row in marginals.iter().take(NUM_PLAYERS) {
        dense.extend_from_slice(row);
    }
    dense.push(wr_cons);
    let mut one_hot = |n: usize, i: usize| dense.extend((0..n).map(|j| if j == i { 1.0 } else { 0.0 }));
    one_hot(8, view.phase.index());
    one_hot(NUM_ROLES, view.role.index());
    one_hot(NUM_PLAYERS, view.observer as usize);
    dense.extend(view.alive.iter().map(|&a| if a { 1.0 } else { 0.0 }));
    FeatureVector { tokens, dense }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub config: NetConfig,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub probs: [f64; ACTION_SPACE],
    pub value: f64,
}

impl ActionDistribution {
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn argmax(&self) -> usize {
        (0..ACTION_SPACE)
            .max_by(|&a, &b| self.probs[a].total_cmp(&self.probs[b]).then(b.cmp(&a)))
            .unwrap()
    }

    pub fn entropy(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub dist: ActionDistribution,
}

/// Softmax of `logits - mask * 1e9`, computed stably.
pub fn masked_softmax(logits: &[f64], mask: &ActionMask) -> Result<[f64; ACTION_SPACE], PolicyError> {
    if !mask.any_legal() {
        return Err(PolicyError::AllMasked);
    }
    let mut z = [0.0; ACTION_SPACE];
    for i in 0..ACTION_SPACE {
        z[i] = logits[i] - mask.penalty_indicator(i) * MASK_PENALTY;
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in &mut z {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in &mut z {
        *v /= sum;
    }
    Ok(z)
}

impl PolicyParams {
    pub fn zeros(config: NetConfig) -> Self {
        PolicyParams {
            data: vec![0.0; config.param_count()],
            config,
        }
    }

    /// Scaled random init: uniform in +-sqrt(3 / fan_in) for weights, small
    /// policy head, zero biases.
    pub fn init<R: Rng>(config: NetConfig, rng: &mut R) -> Self {
        let mut p = PolicyParams::zeros(config);
        let l = config.layout();
        let (e, h, d) = (config.embed, config.hidden, config.input_dim());
        let mut fill = |start: usize, n: usize, scale: f64, data: &mut Vec<f64>| {
            for v in &mut data[start..start + n] {
                *v = rng.gen_range(-scale..scale);
            }
        };
        let emb = (SUBJECT_SLOTS + VERB_SLOTS + OBJECT_SLOTS) * e;
        fill(l.subj, emb, 0.5, &mut p.data);
        fill(l.w1, h * d, (3.0 / d as f64).sqrt(), &mut p.data);
        fill(l.w2, h * h, (3.0 / h as f64).sqrt(), &mut p.data);
        fill(l.wp, ACTION_SPACE * h, 0.01 * (3.0 / h as f64).sqrt(), &mut p.data);
        fill(l.wv, h, (3.0 / h as f64).sqrt(), &mut p.data);
        p
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Pooled event embedding followed by the dense features.
    pub fn input_vector(&self, f: &FeatureVector) -> Result<Vec<f64>, PolicyError> {
        let c = self.config;
        if f.dense.len() != c.dense {
            return Err(PolicyError::Dimension {
                expected: c.dense,
                got: f.dense.len(),
            });
        }
        let l = c.layout();
        let e = c.embed;
        let mut x = vec![0.0; c.input_dim()];
        if !f.tokens.is_empty() {
            let scale = 1.0 / f.tokens.len() as f64;
            for t in &f.tokens {
                let rows = [
                    l.subj + t[0] as usize * e,
                    l.verb + t[1] as usize * e,
                    l.obj + t[2] as usize * e,
                ];
                for r in rows {
                    for (xk, w) in x[..e].iter_mut().zip(&self.data[r..r + e]) {
                        *xk += w * scale;
                    }
                }
            }
        }
        x[e..].copy_from_slice(&f.dense);
        Ok(x)
    }

    pub fn forward_cached(&self, f: &FeatureVector, mask: &ActionMask) -> Result<ForwardCache, PolicyError> {
        let c = self.config;
        let l = c.layout();
        let (h, d) = (c.hidden, c.input_dim());
        let x = self.input_vector(f)?;
        let w = &self.data;
        let mut h1 = vec![0.0; h];
        for i in 0..h {
            let row = &w[l.w1 + i * d..l.w1 + (i + 1) * d];
            h1[i] = (w[l.b1 + i] + dot(row, &x)).tanh();
        }
        let mut h2 = vec![0.0; h];
        for i in 0..h {
            let row = &w[l.w2 + i * h..l.w2 + (i + 1) * h];
            h2[i] = (w[l.b2 + i] + dot(row, &h1)).tanh();
        }
        let mut logits = [0.0; ACTION_SPACE];
        for (a, logit) in logits.iter_mut().enumerate() {
            let row = &w[l.wp + a * h..l.wp + (a + 1) * h];
            *logit = w[l.bp + a] + dot(row, &h2);
        }
        let value = w[l.bv] + dot(&w[l.wv..l.wv + h], &h2);
        let probs = masked_softmax(&logits, mask)?;
        Ok(ForwardCache {
            x,
            h1,
            h2,
            dist: ActionDistribution { probs, value },
        })
    }

    pub fn forward(&self, f: &FeatureVector, mask: &ActionMask) -> Result<ActionDistribution, PolicyError> {
        Ok(self.forward_cached(f, mask)?.dist)
    }

    /// Accumulates `scale * dL/dparams` into `grad` given the gradient of the
    /// loss with respect to the logits and the value output.
    fn backward(
        &self,
        f: &FeatureVector,
        cache: &ForwardCache,
        g_logits: &[f64; ACTION_SPACE],
        g_value: f64,
        grad: &mut [f64],
    ) {
        let c = self.config;
        let l = c.layout();
        let (e, h, d) = (c.embed, c.hidden, c.input_dim());
        let w = &self.data;
        let mut g_h2 = vec![0.0; h];
        for a in 0..ACTION_SPACE {
            let g = g_logits[a];
            if g == 0.0 {
                continue;
            }
            grad[l.bp + a] += g;
            for k in 0..h {
                grad[l.wp + a * h + k] += g * cache.h2[k];
                g_h2[k] += g * w[l.wp + a * h + k];
            }
        }
        grad[l.bv] += g_value;
        for k in 0..h {
            grad[l.wv + k] += g_value * cache.h2[k];
            g_h2[k] += g_value * w[l.wv + k];
        }
        let g_a2: Vec<f64> = (0..h).map(|k| g_h2[k] * (1.0 - cache.h2[k] * cache.h2[k])).collect();
        let mut g_h1 = vec![0.0; h];
        for i in 0..h {
            grad[l.b2 + i] += g_a2[i];
            for k in 0..h {
                grad[l.w2 + i * h + k] += g_a2[i] * cache.h1[k];
                g_h1[k] += g_a2[i] * w[l.w2 + i * h + k];
            }
        }
        let g_a1: Vec<f64> = (0..h).map(|k| g_h1[k] * (1.0 - cache.h1[k] * cache.h1[k])).collect();
        let mut g_x = vec![0.0; e];
        for i in 0..h {
            grad[l.b1 + i] += g_a1[i];
            for k in 0..d {
                grad[l.w1 + i * d + k] += g_a1[i] * cache.x[k];
            }
            for k in 0..e {
                g_x[k] += g_a1[i] * w[l.w1 + i * d + k];
            }
        }
        if !f.tokens.is_empty() {
            let scale = 1.0 / f.tokens.len() as f64;
            for t in &f.tokens {
                let rows = [
                    l.subj + t[0] as usize * e,
                    l.verb + t[1] as usize * e,
                    l.obj + t[2] as usize * e,
                ];
                for r in rows {
                    for k in 0..e {
                        grad[r + k] += g_x[k] * scale;
                    }
                }
            }
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Checkpoint::of(self)).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DataError> {
        let ckpt: Checkpoint = serde_json::from_str(s).map_err(|e| DataError::Malformed {
            line: e.line(),
            msg: e.to_string(),
        })?;
        ckpt.into_params()
    }

    pub fn load_json(path: &Path) -> Result<Self, DataError> {
        PolicyParams::from_json(&fs::read_to_string(path)?)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NetConfig,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Checkpoint {
    fn of(p: &PolicyParams) -> Self {
        Checkpoint {
            format: "wolfctl-policy".into(),
            version: CHECKPOINT_VERSION,
            config: p.config,
            shape: vec![p.data.len()],
            data: p.data.clone(),
        }
    }

    fn into_params(self) -> Result<PolicyParams, DataError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(DataError::Invalid(format!("unsupported checkpoint version {}", self.version)));
        }
        let expected = self.config.param_count();
        if self.shape != [expected] || self.data.len() != expected {
            return Err(DataError::Invalid(format!(
                "checkpoint shape {:?} does not match config ({expected} params)",
                self.shape
            )));
        }
        Ok(PolicyParams {
            config: self.config,
            data: self.data,
        })
    }
}

/// One shared net, or one net per role.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBank {
    pub nets: Vec<PolicyParams>,
}

impl PolicyBank {
    pub fn shared(params: PolicyParams) -> Self {
        PolicyBank { nets: vec![params] }
    }

    pub fn per_role(params: PolicyParams) -> Self {
        PolicyBank {
            nets: vec![params; NUM_ROLES],
        }
    }

    pub fn init<R: Rng>(config: NetConfig, per_role: bool, rng: &mut R) -> Self {
        let n = if per_role { NUM_ROLES } else { 1 };
        PolicyBank {
            nets: (0..n).map(|_| PolicyParams::init(config, rng)).collect(),
        }
    }

    pub fn is_per_role(&self) -> bool {
        self.nets.len() > 1
    }

    pub fn net_index(&self, role: Role) -> usize {
        if self.is_per_role() {
            role.index()
        } else {
            0
        }
    }

    pub fn net(&self, role: Role) -> &PolicyParams {
        &self.nets[self.net_index(role)]
    }

    pub fn to_json(&self) -> String {
        let file = BankFile {
            format: "wolfctl-policy-bank".into(),
            version: CHECKPOINT_VERSION,
            nets: self.nets.iter().map(Checkpoint::of).collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    /// Reads a bank file or a single-net checkpoint.
    pub fn from_json(s: &str) -> Result<Self, DataError> {
        if let Ok(file) = serde_json::from_str::<BankFile>(s) {
            if file.version != CHECKPOINT_VERSION {
                return Err(DataError::Invalid(format!("unsupported checkpoint version {}", file.version)));
            }
            if !(file.nets.len() == 1 || file.nets.len() == NUM_ROLES) {
                return Err(DataError::Invalid(format!("bank holds {} nets", file.nets.len())));
            }
            let nets = file.nets.into_iter().map(Checkpoint::into_params).collect::<Result<_, _>>()?;
            return Ok(PolicyBank { nets });
        }
        Ok(PolicyBank::shared(PolicyParams::from_json(s)?))
    }

    pub fn save_json(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, DataError> {
        PolicyBank::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFile {
    format: String,
    version: u32,
    nets: Vec<Checkpoint>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn forward(params: &PolicyParams, features: &FeatureVector, mask: &ActionMask) -> Result<ActionDistribution, PolicyError> {
    params.forward(features, mask)
}

/// Draws an action index; `greedy` takes the argmax instead.
pub fn sample_action<R: Rng>(dist: &ActionDistribution, rng: &mut R, greedy: bool) -> usize {
    if greedy {
        return dist.argmax();
    }
    let idx = WeightedIndex::new(dist.probs.iter().copied()).expect("valid distribution");
    idx.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Surrogate {
    #[default]
    Clipped,
    /// `-ratio * A` without clipping.
    Unclipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub clip: f64,
    pub surrogate: Surrogate,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            clip: 0.2,
            surrogate: Surrogate::Clipped,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

/// One training sample for the surrogate loss.
#[derive(Debug, Clone, Copy)]
pub struct SampleTarget {
    pub action: usize,
    pub behavior_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub ratio: f64,
}

impl LossParts {
    pub fn total(&self, cfg: &LossConfig) -> f64 {
        self.policy + cfg.value_coef * self.value - cfg.entropy_coef * self.entropy
    }
}

/// Loss of one sample; when `grad` is given, adds `scale * dL/dparams`.
pub fn sample_loss(
    params: &PolicyParams,
    f: &FeatureVector,
    mask: &ActionMask,
    target: &SampleTarget,
    cfg: &LossConfig,
    grad: Option<(&mut [f64], f64)>,
) -> Result<LossParts, PolicyError> {
    let cache = params.forward_cached(f, mask)?;
    let p = &cache.dist.probs;
    let a = target.action;
    let ratio = p[a] / target.behavior_prob;
    let adv = target.advantage;
    let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
    let (policy, active) = match cfg.surrogate {
        Surrogate::Unclipped => (-ratio * adv, true),
        Surrogate::Clipped => {
            let unclipped = ratio * adv;
            let clipped = clipped_ratio * adv;
            if unclipped <= clipped {
                (-unclipped, true)
            } else {
                (-clipped, false)
            }
        }
    };
    let entropy = cache.dist.entropy();
    let diff = cache.dist.value - target.value_target;
    let parts = LossParts {
        policy,
        value: diff * diff,
        entropy,
        ratio,
    };
    if let Some((grad, scale)) = grad {
        let mut g_logits = [0.0; ACTION_SPACE];
        for j in 0..ACTION_SPACE {
            let delta = if j == a { 1.0 } else { 0.0 };
            let mut g = 0.0;
            if active {
                g -= adv * ratio * (delta - p[j]);
            }
            if p[j] > 0.0 {
                // d(-H)/dz_j = p_j (ln p_j + H)
                g += cfg.entropy_coef * p[j] * (p[j].ln() + entropy);
            }
            g_logits[j] = g * scale;
        }
        let g_value = cfg.value_coef * 2.0 * diff * scale;
        params.backward(f, &cache, &g_logits, g_value, grad);
    }
    Ok(parts)
}

/// Max relative error between the analytic gradient and central finite
/// differences (step 1e-5) over every parameter.
pub fn grad_check(
    params: &PolicyParams,
    f: &FeatureVector,
    mask: &ActionMask,
    target: &SampleTarget,
    cfg: &LossConfig,
) -> Result<f64, PolicyError> {
    let mut grad = vec![0.0; params.len()];
    sample_loss(params, f, mask, target, cfg, Some((&mut grad, 1.0)))?;
    let numeric = numeric_grad(params, f, mask, target, cfg)?;
    Ok(max_rel_error(&grad, &numeric))
}

pub fn numeric_grad(
    params: &PolicyParams,
    f: &FeatureVector,
    mask: &ActionMask,
    target: &SampleTarget,
    cfg: &LossConfig,
) -> Result<Vec<f64>, PolicyError> {
    const H: f64 = 1e-5;
    let mut p = params.clone();
    let mut out = vec![0.0; params.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let orig = p.data[i];
        p.data[i] = orig + H;
        let up = sample_loss(&p, f, mask, target, cfg, None)?.total(cfg);
        p.data[i] = orig - H;
        let down = sample_loss(&p, f, mask, target, cfg, None)?.total(cfg);
        p.data[i] = orig;
        *o = (up - down) / (2.0 * H);
    }
    Ok(out)
}

/// `|a - n| / max(|a|, |n|, 1e-6)`, maximized.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Adam with global-norm gradient clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_grad_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: 0.5,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let clip = if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
            self.max_grad_norm / norm
        } else {
            1.0
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i] * clip;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Index of the win-rate target inside the dense block.
pub const WR_CONS_OFFSET: usize = NUM_PLAYERS * NUM_ROLES;

/// Embedding row sum of one event, for checking pooling.
pub fn event_embedding(params: &PolicyParams, e: &Event) -> Vec<f64> {
    let c = params.config;
    let l = c.layout();
    let t = encode_event(e);
    (0..c.embed)
        .map(|k| {
            params.data[l.subj + t[0] as usize * c.embed + k]
                + params.data[l.verb + t[1] as usize * c.embed + k]
                + params.data[l.obj + t[2] as usize * c.embed + k]
        })
        .collect()
}

/// Self-role one-hot position, exposed for feature inspection.
pub fn role_feature_offset(role: Role) -> usize {
    WR_CONS_OFFSET + 1 + 8 + role.index()
}

pub fn seat_feature_offset(p: PlayerId) -> usize {
    WR_CONS_OFFSET + 1 + 8 + NUM_ROLES + p as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Action, GameConfig, GameState, Phase};
    use crate::predictor::init_belief;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng) -> ActionMask {
        let mut legal = [false; ACTION_SPACE];
        for l in legal.iter_mut() {
            *l = rng.gen_bool(0.3);
        }
        legal[rng.gen_range(0..ACTION_SPACE)] = true;
        ActionMask::from_legal(legal)
    }

    fn small_instance(seed: u64) -> (PolicyParams, FeatureVector, ActionMask, SampleTarget) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = NetConfig { embed: 4, hidden: 8, dense: 6 };
        let mut params = PolicyParams::init(cfg, &mut rng);
        // larger policy head so the entropy/ratio terms are not negligible
        for v in params.data.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let n_tokens = rng.gen_range(0..4);
        let tokens = (0..n_tokens)
            .map(|_| {
                [
                    rng.gen_range(0..SUBJECT_SLOTS) as u16,
                    rng.gen_range(0..VERB_SLOTS) as u16,
                    rng.gen_range(0..OBJECT_SLOTS) as u16,
                ]
            })
            .collect();
        let dense = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = FeatureVector { tokens, dense };
        let mask = random_mask(&mut rng);
        let dist = params.forward(&f, &mask).unwrap();
        let legal: Vec<usize> = (0..ACTION_SPACE).filter(|&i| mask.is_legal_index(i)).collect();
        let action = legal[rng.gen_range(0..legal.len())];
        let target = SampleTarget {
            action,
            behavior_prob: dist.probs[action] * rng.gen_range(0.9..1.1),
            advantage: rng.gen_range(-2.0..2.0),
            value_target: rng.gen_range(-1.0..1.0),
        };
        (params, f, mask, target)
    }

    #[test]
    fn grad_check_small_instances() {
        let cfg = LossConfig::default();
        for seed in 0..10 {
            let (p, f, m, t) = small_instance(seed);
            let err = grad_check(&p, &f, &m, &t, &cfg).unwrap();
            assert!(err <= 1e-4, "seed {seed}: {err}");
            let unclipped = LossConfig { surrogate: Surrogate::Unclipped, ..cfg };
            assert!(grad_check(&p, &f, &m, &t, &unclipped).unwrap() <= 1e-4);
        }
    }

    #[test]
    fn zero_advantage_gives_zero_policy_gradient() {
        let (p, f, m, mut t) = small_instance(3);
        t.advantage = 0.0;
        let cfg = LossConfig { value_coef: 0.0, entropy_coef: 0.0, ..LossConfig::default() };
        let mut g = vec![0.0; p.len()];
        sample_loss(&p, &f, &m, &t, &cfg, Some((&mut g, 1.0))).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_value_target_gives_zero_value_gradient() {
        let (p, f, m, mut t) = small_instance(4);
        t.value_target = p.forward(&f, &m).unwrap().value;
        t.advantage = 0.0;
        let cfg = LossConfig { entropy_coef: 0.0, ..LossConfig::default() };
        let mut g = vec![0.0; p.len()];
        sample_loss(&p, &f, &m, &t, &cfg, Some((&mut g, 1.0))).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_legal_action_has_probability_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PolicyParams::init(NetConfig::default(), &mut rng);
        let mut mask = ActionMask::none();
        mask.allow(Action::Vote(3));
        let f = FeatureVector { tokens: vec![], dense: vec![0.1; DENSE_DIM] };
        let d = p.forward(&f, &mask).unwrap();
        assert_eq!(d.probs[Action::Vote(3).index()], 1.0);
        for _ in 0..20 {
            assert_eq!(sample_action(&d, &mut rng, false), Action::Vote(3).index());
        }
    }

    #[test]
    fn zero_params_are_uniform_over_legal() {
        let p = PolicyParams::zeros(NetConfig::default());
        let mut mask = ActionMask::none();
        for t in [1, 4, 6, 8] {
            mask.allow(Action::Vote(t));
        }
        mask.allow(Action::Pass);
        let f = FeatureVector { tokens: vec![[0, 4, 2]], dense: vec![0.0; DENSE_DIM] };
        let d = p.forward(&f, &mask).unwrap();
        for i in 0..ACTION_SPACE {
            let expected = if mask.is_legal_index(i) { 0.2 } else { 0.0 };
            assert!((d.probs[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn all_masked_is_an_error() {
        let p = PolicyParams::zeros(NetConfig::default());
        let f = FeatureVector { tokens: vec![], dense: vec![0.0; DENSE_DIM] };
        assert_eq!(p.forward(&f, &ActionMask::none()), Err(PolicyError::AllMasked));
    }

    #[test]
    fn sampling_frequencies_match() {
        let mut probs = [0.0; ACTION_SPACE];
        probs[0] = 0.7;
        probs[5] = 0.3;
        let d = ActionDistribution { probs, value: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_action(&d, &mut rng, false) == 0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.01, "{freq}");
        let mut a = ChaCha8Rng::seed_from_u64(2);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let sa: Vec<usize> = (0..50).map(|_| sample_action(&d, &mut a, false)).collect();
        let sb: Vec<usize> = (0..50).map(|_| sample_action(&d, &mut b, false)).collect();
        assert_eq!(sa, sb);
        assert_eq!(sample_action(&d, &mut a, true), 0);
    }

    #[test]
    fn featurize_empty_history_and_pooling() {
        let s = GameState::new(5, &GameConfig::default()).unwrap();
        let observer = s.players_with(Role::Villager).next().unwrap();
        let view = StateView::new(&s, observer);
        let belief = init_belief(observer, Role::Villager, &[]).unwrap();
        let f = featurize(&view, &belief, 0.3);
        assert_eq!(f.dense.len(), DENSE_DIM);
        assert!(f.tokens.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = PolicyParams::init(NetConfig::default(), &mut rng);
        let x = params.input_vector(&f).unwrap();
        assert!(x[..16].iter().all(|&v| v == 0.0));
        for p in 0..9 {
            let expected = if p == observer as usize { 0.0 } else { 3.0 / 8.0 };
            assert!((f.dense[p * 5] - expected).abs() < 1e-12);
        }
        assert_eq!(f.dense[WR_CONS_OFFSET], 0.3);
        assert_eq!(f.dense[role_feature_offset(Role::Villager)], 1.0);
        assert_eq!(f.dense[seat_feature_offset(observer)], 1.0);
        assert_eq!(featurize(&view, &belief, 0.3), f);
        assert_ne!(featurize(&view, &belief, 0.1), featurize(&view, &belief, 0.9));

        let e = Event::new(1, Phase::DayVote, 3, Verb::Vote, Object::Player(1));
        let one = FeatureVector { tokens: vec![encode_event(&e)], dense: f.dense.clone() };
        let x = params.input_vector(&one).unwrap();
        let direct = event_embedding(&params, &e);
        for k in 0..16 {
            assert!((x[k] - direct[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_verb_token_is_rejected() {
        assert_eq!(verb_token("vote"), Ok(Verb::Vote));
        assert_eq!(verb_token("sing"), Err(PolicyError::UnknownVerb("sing".into())));
    }

    #[test]
    fn checkpoint_json_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = PolicyParams::init(NetConfig::default(), &mut rng);
        let back = PolicyParams::from_json(&p.to_json()).unwrap();
        assert_eq!(back.config, p.config);
        assert!(back.data.iter().zip(&p.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut bad: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        bad["shape"] = serde_json::json!([3]);
        assert!(PolicyParams::from_json(&bad.to_string()).is_err());

        let bank = PolicyBank::init(NetConfig { embed: 2, hidden: 3, dense: DENSE_DIM }, true, &mut rng);
        let back = PolicyBank::from_json(&bank.to_json()).unwrap();
        assert_eq!(back, bank);
        assert_eq!(back.net(Role::Seer), &bank.nets[Role::Seer.index()]);
        assert_eq!(PolicyBank::from_json(&p.to_json()).unwrap(), PolicyBank::shared(p));
    }

    fn restricted_softmax(logits: &[f64], mask: &ActionMask) -> Vec<f64> {
        let legal: Vec<usize> = (0..ACTION_SPACE).filter(|&i| mask.is_legal_index(i)).collect();
        let m = legal.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = legal.iter().map(|&i| (logits[i] - m).exp()).sum();
        (0..ACTION_SPACE)
            .map(|i| if mask.is_legal_index(i) { (logits[i] - m).exp() / z } else { 0.0 })
            .collect()
    }

    proptest! {
        #[test]
        fn masked_softmax_matches_restricted(seed in any::<u64>(), shift in -50.0f64..50.0, masked_bump in -1e3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = random_mask(&mut rng);
            let mut logits: Vec<f64> = (0..ACTION_SPACE).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let p = masked_softmax(&logits, &mask).unwrap();
            let oracle = restricted_softmax(&logits, &mask);
            let mut sum = 0.0;
            for i in 0..ACTION_SPACE {
                if mask.is_legal_index(i) { sum += p[i]; } else { prop_assert!(p[i] <= 1e-12); }
                prop_assert!((p[i] - oracle[i]).abs() < 1e-9);
            }
            prop_assert!((sum - 1.0).abs() < 1e-9);
            // shift invariance
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            let q = masked_softmax(&shifted, &mask).unwrap();
            for i in 0..ACTION_SPACE { prop_assert!((p[i] - q[i]).abs() < 1e-9); }
            // changing a masked logit leaves legal probabilities alone
            if let Some(j) = (0..ACTION_SPACE).find(|&i| !mask.is_legal_index(i)) {
                logits[j] += masked_bump;
                let r = masked_softmax(&logits, &mask).unwrap();
                for i in 0..ACTION_SPACE {
                    if mask.is_legal_index(i) { prop_assert!((p[i] - r[i]).abs() <= 1e-12); }
                }
            }
        }
    }
}
