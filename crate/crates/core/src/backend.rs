// SPDX-License-Identifier: MIT OR Apache-2.0

//! The contract between interventions and a model.
//!
//! A backend runs a causal decoder and, after each block writes the residual
//! stream at `(layer, position)`, offers that hidden vector to an optional
//! [`HiddenHook`]. Whatever the hook leaves in the buffer is what flows
//! downstream and what the backend records.

use thiserror::Error;

use crate::trace::{ActivationDump, DumpManifest, LayerMatrix, TraceError};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("sequence of {len} tokens exceeds the context limit of {limit}")]
    ContextOverflow { len: usize, limit: usize },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("backend failure: {0}")]
    Other(String),
}

/// One hidden-state location. Layers count from 1; layer 0 is the
/// embedding output and is never offered to hooks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub layer: usize,
    pub position: usize,
}

pub trait HiddenHook {
    /// Whether [`HiddenHook::visit`] should be called for this layer at all.
    fn wants_layer(&self, _layer: usize) -> bool {
        true
    }

    /// Called once per site in scope. `tokens` holds every token up to and
    /// including `site.position`. Return `true` if `hidden` was modified.
    fn visit(&mut self, site: Site, tokens: &[u32], hidden: &mut [f32]) -> bool;
}

/// Runs two hooks in sequence at every site.
pub struct HookChain<'a> {
    pub first: &'a mut dyn HiddenHook,
    pub second: &'a mut dyn HiddenHook,
}

impl HiddenHook for HookChain<'_> {
    fn wants_layer(&self, layer: usize) -> bool {
        self.first.wants_layer(layer) || self.second.wants_layer(layer)
    }

    fn visit(&mut self, site: Site, tokens: &[u32], hidden: &mut [f32]) -> bool {
        let mut touched = false;
        if self.first.wants_layer(site.layer) {
            touched |= self.first.visit(site, tokens, hidden);
        }
        if self.second.wants_layer(site.layer) {
            touched |= self.second.visit(site, tokens, hidden);
        }
        touched
    }
}

/// Copies every hidden vector it sees at the chosen sites.
#[derive(Debug, Default)]
pub struct Observer {
    pub sites: Vec<Site>,
    pub seen: Vec<(Site, Vec<f32>)>,
}

impl HiddenHook for Observer {
    fn wants_layer(&self, layer: usize) -> bool {
        self.sites.iter().any(|s| s.layer == layer)
    }

    fn visit(&mut self, site: Site, _tokens: &[u32], hidden: &mut [f32]) -> bool {
        if self.sites.contains(&site) {
            self.seen.push((site, hidden.to_vec()));
        }
        false
    }
}

/// Hidden states of one pass, `layers[l]` being `positions x hidden_dim`.
/// Layer 0 holds the embedding output; layers `1..` the block outputs after
/// any hook ran.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    pub hidden_dim: usize,
    pub layers: Vec<Vec<f32>>,
}

impl ForwardRecord {
    pub fn num_positions(&self) -> usize {
        self.layers.first().map_or(0, |l| l.len() / self.hidden_dim.max(1))
    }

    pub fn hidden(&self, layer: usize, position: usize) -> &[f32] {
        let d = self.hidden_dim;
        &self.layers[layer][position * d..(position + 1) * d]
    }

    pub fn to_dump(
        &self,
        model_name: &str,
        capture_point: &str,
        tokens: Vec<String>,
        token_ids: Vec<u32>,
    ) -> Result<ActivationDump, TraceError> {
        let rows = self.num_positions();
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, data)| Ok((l, LayerMatrix::new(rows, self.hidden_dim, data.clone())?)))
            .collect::<Result<_, TraceError>>()?;
        let manifest = DumpManifest {
            model_name: model_name.to_owned(),
            num_layers: self.layers.len().saturating_sub(1),
            hidden_dim: self.hidden_dim,
            capture_point: capture_point.to_owned(),
            tokens,
            token_ids,
        };
        ActivationDump::new(manifest, layers)
    }
}

/// A greedy continuation plus the states that produced it.
#[derive(Debug, Clone)]
pub struct Generation {
    /// Prompt followed by generated tokens.
    pub tokens: Vec<u32>,
    pub prompt_len: usize,
    /// Decoded continuation only.
    pub text: String,
    /// States for every position of `tokens` that was fed through the model.
    pub record: ForwardRecord,
}

pub trait Backend: Sync {
    fn name(&self) -> &str;
    fn hidden_dim(&self) -> usize;
    fn num_layers(&self) -> usize;
    fn context_limit(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<u32>;
    fn token_text(&self, id: u32) -> String;
    fn decode(&self, ids: &[u32]) -> String;

    fn generate(
        &self,
        prompt: &[u32],
        max_new: usize,
        hook: Option<&mut dyn HiddenHook>,
    ) -> Result<Generation, BackendError>;

    /// Dumps a generation's states with this backend's token strings.
    fn dump(&self, generation: &Generation) -> Result<ActivationDump, TraceError> {
        let fed = generation.record.num_positions();
        let ids = generation.tokens[..fed].to_vec();
        let tokens = ids.iter().map(|&t| self.token_text(t)).collect();
        generation
            .record
            .to_dump(self.name(), "residual stream after each block", tokens, ids)
    }
}
