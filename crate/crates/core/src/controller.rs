//! The LSTM policy that emits one decision per slot, and its REINFORCE update.
//!
//! Step `t` feeds the one-hot of step `t−1`'s choice (zeros at `t = 1`)
//! through the LSTM; the hidden state goes through the linear head of the
//! slot's kind and a softmax, and the action is sampled from it. An update
//! ascends `R · Σ_t ∇ log P(a_t | a_{<t})` with ADAM.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MonasError, Result};
use crate::nn::{
    log_softmax, softmax, softmax_sample, AdamState, LstmCell, LstmStepCache, Matrix, INIT_SCALE,
};
use crate::space::{ActionSequence, SearchSpace, SlotKind, SpaceKind};

pub const CHECKPOINT_FORMAT: &str = "monas-controller";
pub const CHECKPOINT_VERSION: u32 = 1;

type Step = (Vec<f64>, Vec<f64>, LstmStepCache, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    /// Decay of the moving-average reward baseline; `None` disables it.
    pub baseline_decay: Option<f64>,
    /// Global-norm gradient clip; `None` disables it.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl ControllerConfig {
    /// Hidden size and learning rate per space: 24 units / 0.03 for AlexNet,
    /// 20 units / 0.008 for CondenseNet, 64 units / 0.008 for the macro space.
    pub fn for_space(kind: SpaceKind, seed: u64) -> Self {
        let (hidden, learning_rate) = match kind {
            SpaceKind::AlexNet => (24, 0.03),
            SpaceKind::CondenseNet => (20, 0.008),
            SpaceKind::Macro => (64, 0.008),
        };
        ControllerConfig {
            hidden,
            learning_rate,
            init_scale: INIT_SCALE,
            baseline_decay: None,
            clip_norm: Some(5.0),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// `candidates × hidden`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Head {
    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.weight.matvec(h)?;
        for (z, b) in z.iter_mut().zip(&self.bias) {
            *z += b;
        }
        Ok(z)
    }
}

/// Everything recorded during one rollout that the update needs.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub caches: Vec<LstmStepCache>,
    pub probs: Vec<Vec<f64>>,
    revision: u64,
}

impl Rollout {
    pub fn revision(&self) -> u64 {
        self.revision
    }
}

/// Gradients in the same tensor order as [`ControllerState::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGrads {
    pub tensors: Vec<Vec<f64>>,
}

impl ControllerGrads {
    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= s);
    }

    fn add_scaled(&mut self, other: &ControllerGrads, s: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    space: SearchSpace,
    config: ControllerConfig,
    lstm: LstmCell,
    head_kinds: Vec<SlotKind>,
    heads: Vec<Head>,
    slot_head: Vec<usize>,
    adam: AdamState,
    rng: ChaCha8Rng,
    revision: u64,
    baseline: Option<f64>,
}

impl ControllerState {
    pub fn new(space: SearchSpace, config: ControllerConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = config.init_scale;
        let lstm = LstmCell::uniform(space.vocab_size(), config.hidden, scale, &mut rng);
        let head_kinds = space.slot_kinds();
        let heads = head_kinds
            .iter()
            .map(|&k| {
                let n = space
                    .slots()
                    .iter()
                    .find(|s| s.kind == k)
                    .map(|s| s.len())
                    .unwrap_or(0);
                Head {
                    weight: Matrix::uniform(n, config.hidden, scale, &mut rng),
                    bias: (0..n)
                        .map(|_| rand::Rng::random_range(&mut rng, -scale..=scale))
                        .collect(),
                }
            })
            .collect();
        Self::assemble(space, config, lstm, head_kinds, heads, rng, 0, None, None)
    }

    /// All parameters zero: every softmax starts uniform.
    pub fn zeroed(space: SearchSpace, config: ControllerConfig) -> Result<Self> {
        let mut state = Self::new(space, config)?;
        for p in state.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(state)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        space: SearchSpace,
        config: ControllerConfig,
        lstm: LstmCell,
        head_kinds: Vec<SlotKind>,
        heads: Vec<Head>,
        rng: ChaCha8Rng,
        revision: u64,
        baseline: Option<f64>,
        adam: Option<AdamState>,
    ) -> Result<Self> {
        if !(config.learning_rate > 0.0) || config.hidden == 0 {
            return Err(MonasError::Config(
                "controller needs hidden > 0 and learning rate > 0".into(),
            ));
        }
        if let Some(d) = config.baseline_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(MonasError::Config(
                    "baseline decay must lie in [0, 1)".into(),
                ));
            }
        }
        if lstm.input_dim() != space.vocab_size() || lstm.hidden_dim() != config.hidden {
            return Err(MonasError::contract(
                "LSTM shape does not match space/config",
            ));
        }
        if head_kinds != space.slot_kinds() || heads.len() != head_kinds.len() {
            return Err(MonasError::contract(
                "heads do not match the space's slot kinds",
            ));
        }
        let mut slot_head = Vec::with_capacity(space.num_slots());
        for slot in space.slots() {
            let k = head_kinds.iter().position(|&h| h == slot.kind).unwrap();
            let head = &heads[k];
            if head.weight.rows() != slot.len()
                || head.weight.cols() != config.hidden
                || head.bias.len() != slot.len()
            {
                return Err(MonasError::contract(format!(
                    "head for {:?} has the wrong shape",
                    slot.kind
                )));
            }
            slot_head.push(k);
        }
        let mut state = ControllerState {
            space,
            lstm,
            head_kinds,
            heads,
            slot_head,
            adam: AdamState::new(config.learning_rate, &[]),
            config,
            rng,
            revision,
            baseline,
        };
        let shapes: Vec<usize> = state.params_mut().iter().map(|p| p.len()).collect();
        state.adam = match adam {
            Some(a) => {
                if a.m.iter().map(Vec::len).ne(shapes.iter().copied())
                    || a.v.iter().map(Vec::len).ne(shapes.iter().copied())
                {
                    return Err(MonasError::contract(
                        "optimizer moments do not match parameters",
                    ));
                }
                a
            }
            None => AdamState::new(state.config.learning_rate, &shapes),
        };
        Ok(state)
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn lstm(&self) -> &LstmCell {
        &self.lstm
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    /// Parameter tensors: LSTM `w`, `u`, `b`, then each head's weight and bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.lstm.w.data_mut(),
            self.lstm.u.data_mut(),
            &mut self.lstm.b,
        ];
        for head in &mut self.heads {
            out.push(head.weight.data_mut());
            out.push(&mut head.bias);
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.lstm.w.data(), self.lstm.u.data(), &self.lstm.b];
        for head in &self.heads {
            out.push(head.weight.data());
            out.push(&head.bias);
        }
        out
    }

    /// Bumps the revision after parameters were edited from outside.
    pub fn touch(&mut self) {
        self.revision += 1;
    }

    /// Returns the new hidden and cell states, the step cache and the logits.
    fn step(
        &self,
        slot: usize,
        previous: Option<(usize, usize)>,
        h: &[f64],
        c: &[f64],
    ) -> Result<Step> {
        let x = self.space.one_hot_input(previous)?;
        let (h, c, cache) = self.lstm.forward(&x, h, c)?;
        let logits = self.heads[self.slot_head[slot]].logits(&h)?;
        Ok((h, c, cache, logits))
    }

    pub fn sample_sequence(&mut self) -> Result<(ActionSequence, Rollout)> {
        let hd = self.config.hidden;
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        let n = self.space.num_slots();
        let mut seq = ActionSequence::default();
        let mut caches = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        let mut previous = None;
        for slot in 0..n {
            let (nh, nc, cache, logits) = self.step(slot, previous, &h, &c)?;
            let sample = softmax_sample(&logits, &mut self.rng)?;
            seq.actions.push(sample.index);
            seq.log_probs.push(sample.log_prob);
            caches.push(cache);
            probs.push(sample.probs);
            previous = Some((slot, sample.index));
            h = nh;
            c = nc;
        }
        Ok((
            seq,
            Rollout {
                caches,
                probs,
                revision: self.revision,
            },
        ))
    }

    /// Teacher-forced replay of `seq`: the rollout record and per-step log-probs.
    pub fn replay(&self, seq: &ActionSequence) -> Result<(Rollout, Vec<f64>)> {
        self.space.validate(seq)?;
        let hd = self.config.hidden;
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        let mut caches = Vec::with_capacity(seq.actions.len());
        let mut probs = Vec::with_capacity(seq.actions.len());
        let mut log_probs = Vec::with_capacity(seq.actions.len());
        let mut previous = None;
        for (slot, &a) in seq.actions.iter().enumerate() {
            let (nh, nc, cache, logits) = self.step(slot, previous, &h, &c)?;
            log_probs.push(log_softmax(&logits)?[a]);
            probs.push(softmax(&logits)?);
            caches.push(cache);
            previous = Some((slot, a));
            h = nh;
            c = nc;
        }
        Ok((
            Rollout {
                caches,
                probs,
                revision: self.revision,
            },
            log_probs,
        ))
    }

    /// `Σ_t log P(a_t | a_{<t}, θ)` recomputed by teacher forcing.
    pub fn action_log_prob(&self, seq: &ActionSequence) -> Result<f64> {
        Ok(self.replay(seq)?.1.iter().sum())
    }

    fn check_rollout(&self, seq: &ActionSequence, rollout: &Rollout) -> Result<()> {
        if rollout.revision != self.revision {
            return Err(MonasError::contract(format!(
                "stale rollout: recorded at revision {}, controller is at {}",
                rollout.revision, self.revision
            )));
        }
        if rollout.caches.len() != seq.actions.len() || rollout.probs.len() != seq.actions.len() {
            return Err(MonasError::contract(
                "rollout length does not match sequence",
            ));
        }
        self.space.validate(seq)
    }

    /// `∇_θ Σ_t log P(a_t)` from a rollout recorded at the current revision.
    pub fn log_prob_gradient(
        &self,
        seq: &ActionSequence,
        rollout: &Rollout,
    ) -> Result<ControllerGrads> {
        self.check_rollout(seq, rollout)?;
        let mut head_grads: Vec<(Matrix, Vec<f64>)> = self
            .heads
            .iter()
            .map(|h| {
                (
                    Matrix::zeros(h.weight.rows(), h.weight.cols()),
                    vec![0.0; h.bias.len()],
                )
            })
            .collect();
        let mut dh = Vec::with_capacity(seq.actions.len());
        for (slot, &a) in seq.actions.iter().enumerate() {
            let k = self.slot_head[slot];
            // d log softmax(z)[a] / dz = onehot(a) − p
            let mut dz: Vec<f64> = rollout.probs[slot].iter().map(|p| -p).collect();
            dz[a] += 1.0;
            let h = &rollout.caches[slot].h;
            let (gw, gb) = &mut head_grads[k];
            gw.add_outer(&dz, h, 1.0);
            for (b, d) in gb.iter_mut().zip(&dz) {
                *b += d;
            }
            dh.push(self.heads[k].weight.matvec_t(&dz)?);
        }
        let lstm = self.lstm.backward(&rollout.caches, &dh)?;
        let mut tensors = vec![lstm.w.data().to_vec(), lstm.u.data().to_vec(), lstm.b];
        for (w, b) in head_grads {
            tensors.push(w.data().to_vec());
            tensors.push(b);
        }
        Ok(ControllerGrads { tensors })
    }

    /// Gradient of `reward · Σ_t log P(a_t)` before clipping and ADAM.
    pub fn reward_gradient(
        &self,
        seq: &ActionSequence,
        rollout: &Rollout,
        reward: f64,
    ) -> Result<ControllerGrads> {
        let mut g = self.log_prob_gradient(seq, rollout)?;
        g.scale(reward);
        Ok(g)
    }

    /// One REINFORCE step from a single sampled network. Returns the global
    /// L2 norm of the (pre-clip) gradient.
    pub fn reinforce_update(
        &mut self,
        seq: &ActionSequence,
        rollout: &Rollout,
        reward: f64,
    ) -> Result<f64> {
        self.reinforce_batch(&[(seq, rollout, reward)])
    }

    /// REINFORCE over a mini-batch of rollouts sharing one revision; the
    /// gradient is the batch mean.
    pub fn reinforce_batch(&mut self, batch: &[(&ActionSequence, &Rollout, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        if batch.iter().any(|(_, _, r)| !r.is_finite()) {
            return Err(MonasError::contract("reward must be finite"));
        }
        let mut total: Option<ControllerGrads> = None;
        let n = batch.len() as f64;
        for &(seq, rollout, reward) in batch {
            let advantage = reward - self.baseline.unwrap_or(0.0);
            let g = self.log_prob_gradient(seq, rollout)?;
            match &mut total {
                None => {
                    let mut g = g;
                    g.scale(advantage / n);
                    total = Some(g);
                }
                Some(t) => t.add_scaled(&g, advantage / n),
            }
        }
        if let Some(decay) = self.config.baseline_decay {
            let mean = batch.iter().map(|(_, _, r)| r).sum::<f64>() / n;
            let b = self.baseline.unwrap_or(0.0);
            self.baseline = Some(decay * b + (1.0 - decay) * mean);
        }
        let mut grads = total.unwrap();
        let norm = grads.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if let Some(clip) = self.config.clip_norm {
            if norm > clip {
                grads.scale(clip / norm);
            }
        }
        let refs: Vec<&[f64]> = grads.tensors.iter().map(Vec::as_slice).collect();
        let mut adam = std::mem::replace(&mut self.adam, AdamState::new(0.0, &[]));
        let result = adam.step(&mut self.params_mut(), &refs);
        self.adam = adam;
        result?;
        self.revision += 1;
        Ok(norm)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            space: self.space.kind(),
            config: self.config.clone(),
            lstm: self.lstm.clone(),
            head_kinds: self.head_kinds.clone(),
            heads: self.heads.clone(),
            adam: self.adam.clone(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
            revision: self.revision,
            baseline: self.baseline,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(MonasError::Config(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let lstm = LstmCell::from_parts(ck.lstm.w, ck.lstm.u, ck.lstm.b)?;
        let mut rng = ChaCha8Rng::from_seed(ck.rng_seed);
        rng.set_stream(ck.rng_stream);
        let word_pos: u128 = ck
            .rng_word_pos
            .parse()
            .map_err(|_| MonasError::Config("bad rng position in checkpoint".into()))?;
        rng.set_word_pos(word_pos);
        Self::assemble(
            SearchSpace::build(ck.space),
            ck.config,
            lstm,
            ck.head_kinds,
            ck.heads,
            rng,
            ck.revision,
            ck.baseline,
            Some(ck.adam),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint())?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(serde_json::from_str(&text)?)
    }
}

/// Versioned JSON checkpoint of a controller, including optimizer moments and
/// the sampler's stream position so a resumed search continues identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub space: SpaceKind,
    pub config: ControllerConfig,
    pub lstm: LstmCell,
    pub head_kinds: Vec<SlotKind>,
    pub heads: Vec<Head>,
    pub adam: AdamState,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    /// Decimal string; JSON numbers cannot hold a u128 portably.
    pub rng_word_pos: String,
    pub revision: u64,
    pub baseline: Option<f64>,
}
