// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation dumps and concept-token matching.
//!
//! A dump holds, for one trace, the hidden-state matrix of every captured
//! layer (`tokens x hidden_dim`, `f32`) plus token metadata. On disk it is a
//! directory with a JSON manifest and one raw little-endian matrix per layer;
//! see `docs/activation-dump.md`.

mod format;
mod matching;

pub use format::{read_dump, write_dump, MAGIC};
pub use matching::{match_concept, match_tokens, normalize_surface, TokenMatch};

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unsupported dump format {found:?} (expected \"FRD1\")")]
    FormatVersionMismatch { found: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("truncated file {path}: {len} bytes is not a whole number of rows")]
    TruncatedFile { path: String, len: u64 },
    #[error("layer {0} is not stored in this dump")]
    MissingLayer(usize),
    #[error("window of {window} tokens ending at {end} is out of range")]
    OutOfRange { end: usize, window: usize },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad manifest: {0}")]
    Json(#[from] serde_json::Error),
}

/// Metadata for one dumped trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub model_name: String,
    /// Deepest layer index of the model; layer 0 is the embedding output.
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// Free text describing where hidden states were read.
    #[serde(default)]
    pub capture_point: String,
    pub tokens: Vec<String>,
    pub token_ids: Vec<u32>,
}

/// A dense row-major `rows x cols` matrix.
#[derive(Debug, Clone)]
pub struct LayerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl LayerMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, TraceError> {
        if data.len() != rows * cols {
            return Err(TraceError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Bit-exact equality, so NaN payloads and signed zeros compare faithfully.
impl PartialEq for LayerMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .map(|v| v.to_bits())
                .eq(other.data.iter().map(|v| v.to_bits()))
    }
}

impl Eq for LayerMatrix {}

/// Hidden states of one trace, indexed by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationDump {
    manifest: DumpManifest,
    layers: BTreeMap<usize, LayerMatrix>,
}

impl ActivationDump {
    pub fn new(manifest: DumpManifest, layers: BTreeMap<usize, LayerMatrix>) -> Result<Self, TraceError> {
        let n = manifest.tokens.len();
        if manifest.token_ids.len() != n {
            return Err(TraceError::ShapeMismatch(format!(
                "{n} tokens but {} token ids",
                manifest.token_ids.len()
            )));
        }
        for (&layer, m) in &layers {
            if layer > manifest.num_layers {
                return Err(TraceError::ShapeMismatch(format!(
                    "layer {layer} beyond num_layers {}",
                    manifest.num_layers
                )));
            }
            if m.rows != n || m.cols != manifest.hidden_dim {
                return Err(TraceError::ShapeMismatch(format!(
                    "layer {layer} is {}x{}, manifest says {n}x{}",
                    m.rows, m.cols, manifest.hidden_dim
                )));
            }
        }
        Ok(Self { manifest, layers })
    }

    pub fn manifest(&self) -> &DumpManifest {
        &self.manifest
    }

    pub fn num_tokens(&self) -> usize {
        self.manifest.tokens.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.manifest.hidden_dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.manifest.tokens
    }

    pub fn layer(&self, layer: usize) -> Result<&LayerMatrix, TraceError> {
        self.layers.get(&layer).ok_or(TraceError::MissingLayer(layer))
    }

    pub fn layers(&self) -> impl Iterator<Item = (usize, &LayerMatrix)> {
        self.layers.iter().map(|(&l, m)| (l, m))
    }

    pub fn hidden(&self, layer: usize, position: usize) -> Result<&[f32], TraceError> {
        Ok(self.layer(layer)?.row(position))
    }

    /// Drops every stored layer for which `keep` is false.
    pub fn retain_layers(&mut self, mut keep: impl FnMut(usize) -> bool) {
        self.layers.retain(|&l, _| keep(l));
    }
}

/// The half-open window `[t - w, t)`.
pub fn window_of(t: usize, w: usize) -> Result<Range<usize>, TraceError> {
    if w == 0 || t < w {
        return Err(TraceError::OutOfRange { end: t, window: w });
    }
    Ok(t - w..t)
}
