// SPDX-License-Identifier: MIT OR Apache-2.0

//! A tiny seeded decoder-only transformer over bytes.
//!
//! The weights are random and never trained. The model exists so every
//! intervention path can run end to end without an external model: it has a
//! residual stream, causal attention and greedy decoding, and it honours the
//! [`HiddenHook`] contract exactly.

mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ForwardRecord, Generation, HiddenHook, Site};
use layers::{Block, KvCache};

pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const VOCAB: usize = 258;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub context_limit: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            layers: 8,
            hidden_dim: 64,
            heads: 4,
            context_limit: 4096,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        if self.layers == 0 || self.hidden_dim == 0 || self.heads == 0 || self.context_limit == 0 {
            return bad(format!("all dimensions must be at least 1: {self:?}"));
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return bad(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.heads
            ));
        }
        Ok(())
    }
}

pub struct ToyModel {
    config: ToyConfig,
    name: String,
    /// `VOCAB x d`, also used as the unembedding.
    embed: Vec<f32>,
    blocks: Vec<Block>,
}

impl std::fmt::Debug for ToyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToyModel")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

/// Logits for each fed position plus the states behind them.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `positions x VOCAB`.
    pub logits: Vec<f32>,
    pub record: ForwardRecord,
}

impl ForwardOutput {
    pub fn logits_at(&self, position: usize) -> &[f32] {
        &self.logits[position * VOCAB..(position + 1) * VOCAB]
    }
}

impl ToyModel {
    pub fn new(config: ToyConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.hidden_dim;
        let embed = layers::gaussian(&mut rng, VOCAB * d, 1.0);
        let blocks = (0..config.layers)
            .map(|_| Block::new(&mut rng, d, config.heads))
            .collect();
        let name = format!(
            "toy-L{}-d{}-h{}-seed{}",
            config.layers, config.hidden_dim, config.heads, config.seed
        );
        Ok(Self {
            config,
            name,
            embed,
            blocks,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    /// A causal pass over `tokens`, returning logits at every position.
    pub fn forward(
        &self,
        tokens: &[u32],
        mut hook: Option<&mut dyn HiddenHook>,
    ) -> Result<ForwardOutput, BackendError> {
        let mut session = self.session(tokens.len())?;
        let mut logits = Vec::with_capacity(tokens.len() * VOCAB);
        for p in 0..tokens.len() {
            let h = session.step(tokens, p, &mut hook)?;
            logits.extend(self.logits(&h));
        }
        Ok(ForwardOutput {
            logits,
            record: session.record,
        })
    }

    /// Greedy decoding. Every token, generated ones included, is fed through
    /// the model so the record covers the whole returned sequence. Decoding
    /// stops early after emitting [`EOS`].
    pub fn generate_greedy(
        &self,
        prompt: &[u32],
        max_new: usize,
        mut hook: Option<&mut dyn HiddenHook>,
    ) -> Result<Generation, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Other("empty prompt".into()));
        }
        let mut session = self.session(prompt.len() + max_new)?;
        let mut tokens = prompt.to_vec();
        let mut last = Vec::new();
        for p in 0..prompt.len() {
            last = session.step(&tokens, p, &mut hook)?;
        }
        for _ in 0..max_new {
            let next = argmax(&self.logits(&last));
            tokens.push(next);
            last = session.step(&tokens, tokens.len() - 1, &mut hook)?;
            if next == EOS {
                break;
            }
        }
        Ok(Generation {
            text: self.decode(&tokens[prompt.len()..]),
            prompt_len: prompt.len(),
            tokens,
            record: session.record,
        })
    }

    fn session(&self, len: usize) -> Result<Session<'_>, BackendError> {
        if len > self.config.context_limit {
            return Err(BackendError::ContextOverflow {
                len,
                limit: self.config.context_limit,
            });
        }
        let d = self.config.hidden_dim;
        Ok(Session {
            model: self,
            caches: (0..self.config.layers)
                .map(|_| KvCache::with_capacity(len, d))
                .collect(),
            record: ForwardRecord {
                hidden_dim: d,
                layers: (0..=self.config.layers).map(|_| Vec::with_capacity(len * d)).collect(),
            },
        })
    }

    fn embed_row(&self, token: u32, position: usize) -> Vec<f32> {
        let d = self.config.hidden_dim;
        let t = token as usize;
        let mut h = self.embed[t * d..(t + 1) * d].to_vec();
        for (i, x) in h.iter_mut().enumerate() {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = position as f64 * freq;
            *x += if i % 2 == 0 { angle.sin() } else { angle.cos() } as f32;
        }
        h
    }

    fn logits(&self, h: &[f32]) -> Vec<f32> {
        let d = self.config.hidden_dim;
        let x = layers::layer_norm(h);
        self.embed.chunks_exact(d).map(|e| layers::dot(e, &x)).collect()
    }
}

/// Ties break toward the lower id.
fn argmax(logits: &[f32]) -> u32 {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

struct Session<'m> {
    model: &'m ToyModel,
    caches: Vec<KvCache>,
    record: ForwardRecord,
}

impl Session<'_> {
    /// Feeds `tokens[p]`; positions before `p` must already be fed. The hook
    /// sees `tokens` as known so far, which may extend beyond `p` while a
    /// prompt is being processed. Returns the last layer's state.
    fn step(
        &mut self,
        tokens: &[u32],
        p: usize,
        hook: &mut Option<&mut dyn HiddenHook>,
    ) -> Result<Vec<f32>, BackendError> {
        let token = tokens[p];
        if token as usize >= VOCAB {
            return Err(BackendError::Other(format!("token id {token} outside the vocabulary")));
        }
        let mut h = self.model.embed_row(token, p);
        self.record.layers[0].extend_from_slice(&h);
        for (l, block) in self.model.blocks.iter().enumerate() {
            h = block.forward(&h, &mut self.caches[l]);
            let layer = l + 1;
            if let Some(hook) = hook.as_mut() {
                if hook.wants_layer(layer) {
                    hook.visit(Site { layer, position: p }, tokens, &mut h);
                }
            }
            self.record.layers[layer].extend_from_slice(&h);
        }
        Ok(h)
    }
}

impl Backend for ToyModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    fn num_layers(&self) -> usize {
        self.config.layers
    }

    fn context_limit(&self) -> usize {
        self.config.context_limit
    }

    /// `BOS` followed by the UTF-8 bytes of `text`.
    fn encode(&self, text: &str) -> Vec<u32> {
        std::iter::once(BOS).chain(text.bytes().map(u32::from)).collect()
    }

    fn token_text(&self, id: u32) -> String {
        match id {
            BOS => "<bos>".into(),
            EOS => "<eos>".into(),
            // one char per byte so token strings stay aligned with ids
            b => char::from(b as u8).to_string(),
        }
    }

    fn decode(&self, ids: &[u32]) -> String {
        let bytes: Vec<u8> = ids.iter().filter(|&&t| t < 256).map(|&t| t as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn generate(
        &self,
        prompt: &[u32],
        max_new: usize,
        hook: Option<&mut dyn HiddenHook>,
    ) -> Result<Generation, BackendError> {
        self.generate_greedy(prompt, max_new, hook)
    }
}
