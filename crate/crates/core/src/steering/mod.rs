// SPDX-License-Identifier: MIT OR Apache-2.0

//! Interventions on a backend's residual stream at concept tokens.
//!
//! Three edits are supported at matched sites: norm-preserving
//! interpolation toward a concept vector (positive steering), outright
//! replacement (symbolic patching), and subtraction (negative steering).
//! Vector tables come from [`make_vectors`] or [`build_symbolic`]; shuffled
//! controls reassign vectors with a seeded derangement.

mod hook;
mod vectors;

pub use hook::{ConceptHook, Touch, TouchReport};
pub use vectors::{build_symbolic, derangement, make_vectors, permute_table, shuffle_table, VectorSources};

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Range, RangeInclusive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, Generation};
use crate::obfuscation::{Concept, Naming};
use crate::replab::{ConceptTable, RepError};

/// Steering scale used by default.
pub const DEFAULT_SCALE: f64 = 2.0 / 3.0;
/// Steering window used by default.
pub const DEFAULT_STEER_WINDOW: Range<usize> = 1500..2500;
/// Window for symbolic patching and negative steering.
pub const DEFAULT_PATCH_WINDOW: Range<usize> = 2000..4000;
/// Scales tried for symbolic patching.
pub const PATCH_SCALES: [f64; 2] = [10.0, 20.0];
/// Scales compared when picking the steering scale.
pub const SWEEP_SCALES: [f64; 2] = [2.0 / 3.0, 4.0 / 5.0];

#[derive(Debug, Error)]
pub enum SteeringError {
    #[error("s*h + (1-s)*v is the zero vector")]
    DegenerateMix,
    #[error("hidden state is the zero vector")]
    ZeroHidden,
    #[error("no vector for concept {0:?}")]
    MissingConcept(Concept),
    #[error("{0} representations are required for this vector kind")]
    MissingSource(&'static str),
    #[error("vector for {concept:?} has dimension {found}, backend has {expected}")]
    DimensionMismatch {
        concept: Concept,
        expected: usize,
        found: usize,
    },
    #[error("invalid steering spec: {0}")]
    InvalidSpec(String),
    #[error("window end {end} exceeds the maximum sequence length {limit}")]
    WindowBeyondTrace { end: usize, limit: usize },
    #[error("prefix of {len} tokens is shorter than the window start {start}")]
    PrefixTooShort { len: usize, start: usize },
    #[error("need at least 2 items to derange, got {0}")]
    TooFewToShuffle(usize),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Norm-preserving interpolation: `h' = s h + (1 - s) v`, rescaled to `|h|`.
pub fn steer_update(h: &[f64], v: &[f64], s: f64) -> Result<Vec<f64>, SteeringError> {
    let mut out = h.to_vec();
    steer_in_place(&mut out, v, s)?;
    Ok(out)
}

fn steer_in_place<T: Copy + Into<f64> + FromF64>(h: &mut [T], v: &[f64], s: f64) -> Result<(), SteeringError> {
    let h_norm = h.iter().map(|&x| x.into().powi(2)).sum::<f64>().sqrt();
    if h_norm == 0.0 {
        return Err(SteeringError::ZeroHidden);
    }
    if s == 1.0 {
        return Ok(());
    }
    let mixed: Vec<f64> = h.iter().zip(v).map(|(&x, &y)| s * x.into() + (1.0 - s) * y).collect();
    let m_norm = mixed.iter().map(|x| x * x).sum::<f64>().sqrt();
    if m_norm == 0.0 {
        return Err(SteeringError::DegenerateMix);
    }
    let k = h_norm / m_norm;
    for (o, m) in h.iter_mut().zip(mixed) {
        *o = T::from_f64(m * k);
    }
    Ok(())
}

trait FromF64 {
    fn from_f64(v: f64) -> Self;
}

impl FromF64 for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl FromF64 for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorKind {
    InNaming,
    CrossNaming,
    RandomMatchedNorm,
    Symbolic,
    Shuffled,
    Negative,
}

/// What happens to a matched hidden state `h` given its concept vector `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Intervention {
    /// `h <- |h| (s h + (1 - s) v) / |s h + (1 - s) v|`
    Steer { scale: f64 },
    /// `h <- v`
    Patch,
    /// `h <- h - v`
    Subtract,
}

impl Intervention {
    pub(crate) fn apply(&self, h: &mut [f32], v: &[f64]) -> Result<(), SteeringError> {
        match *self {
            Intervention::Steer { scale } => steer_in_place(h, v, scale),
            Intervention::Patch => {
                h.iter_mut().zip(v).for_each(|(o, &x)| *o = x as f32);
                Ok(())
            }
            Intervention::Subtract => {
                h.iter_mut().zip(v).for_each(|(o, &x)| *o = (f64::from(*o) - x) as f32);
                Ok(())
            }
        }
    }
}

/// One configured intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub vector_kind: VectorKind,
    /// Interpolation scale for steering kinds; unused by patching and
    /// subtraction.
    pub scale: f64,
    pub t_start: usize,
    pub t_end: usize,
    pub layers: BTreeSet<usize>,
    pub vectors: ConceptTable,
    #[serde(default)]
    pub seed: u64,
}

impl SteeringSpec {
    pub fn window(&self) -> Range<usize> {
        self.t_start..self.t_end
    }

    pub fn intervention(&self) -> Intervention {
        match self.vector_kind {
            VectorKind::Symbolic => Intervention::Patch,
            VectorKind::Negative => Intervention::Subtract,
            _ => Intervention::Steer { scale: self.scale },
        }
    }

    pub fn validate(&self, hidden_dim: usize, num_layers: usize) -> Result<(), SteeringError> {
        let bad = |m: String| Err(SteeringError::InvalidSpec(m));
        if self.t_start >= self.t_end {
            return bad(format!("empty window [{}, {})", self.t_start, self.t_end));
        }
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if let Some(l) = self.layers.iter().find(|&&l| l == 0 || l > num_layers) {
            return bad(format!("layer {l} outside 1..={num_layers}"));
        }
        if !self.scale.is_finite() {
            return bad(format!("scale {}", self.scale));
        }
        for (&concept, v) in &self.vectors {
            if v.len() != hidden_dim {
                return Err(SteeringError::DimensionMismatch {
                    concept,
                    expected: hidden_dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("non-finite entry in the {concept:?} vector"));
            }
        }
        Ok(())
    }
}

/// Layer -> concept table. Each layer in the map is intervened on with its
/// own vectors.
pub type LayerTables = BTreeMap<usize, ConceptTable>;

/// The same table at every layer of `layers`.
pub fn same_table(layers: &BTreeSet<usize>, table: &ConceptTable) -> LayerTables {
    layers.iter().map(|&l| (l, table.clone())).collect()
}

/// Result of a hooked generation.
#[derive(Debug, Clone)]
pub struct SteeredRun {
    pub generation: Generation,
    pub report: TouchReport,
}

/// Shuffled controls: either the table as given, or reassigned.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Matched,
    /// A seeded derangement within each concept class.
    Shuffled {
        seed: u64,
    },
    /// An explicit reassignment `concept -> concept whose vector it receives`.
    Permuted(BTreeMap<Concept, Concept>),
}

impl Control {
    pub fn table(&self, table: &ConceptTable) -> Result<ConceptTable, SteeringError> {
        match self {
            Control::Matched => Ok(table.clone()),
            Control::Shuffled { seed } => shuffle_table(table, *seed),
            Control::Permuted(map) => permute_table(table, map),
        }
    }

    /// [`Control::table`] at every layer. A seeded shuffle draws the same
    /// reassignment at every layer holding the same concepts.
    pub fn tables(&self, tables: &LayerTables) -> Result<LayerTables, SteeringError> {
        tables.iter().map(|(&l, t)| Ok((l, self.table(t)?))).collect()
    }
}

/// Runs generation with `intervention` applied at every matched concept
/// position in `window`, on each layer of `tables` with that layer's vectors.
pub fn run_intervention<B: Backend + ?Sized>(
    backend: &B,
    prefix: &[u32],
    max_new: usize,
    intervention: Intervention,
    window: Range<usize>,
    tables: &LayerTables,
    naming: &Naming,
) -> Result<SteeredRun, SteeringError> {
    if window.start >= window.end {
        return Err(SteeringError::InvalidSpec(format!(
            "empty window [{}, {})",
            window.start, window.end
        )));
    }
    if prefix.len() < window.start {
        return Err(SteeringError::PrefixTooShort {
            len: prefix.len(),
            start: window.start,
        });
    }
    let limit = backend.context_limit();
    if window.end > limit {
        return Err(SteeringError::WindowBeyondTrace { end: window.end, limit });
    }
    if let Some(l) = tables.keys().find(|&&l| l == 0 || l > backend.num_layers()) {
        return Err(SteeringError::InvalidSpec(format!(
            "layer {l} outside 1..={}",
            backend.num_layers()
        )));
    }
    for (&concept, v) in tables.values().flatten() {
        if v.len() != backend.hidden_dim() {
            return Err(SteeringError::DimensionMismatch {
                concept,
                expected: backend.hidden_dim(),
                found: v.len(),
            });
        }
    }
    let mut hook = ConceptHook::new(backend, naming, tables.clone(), intervention, window);
    let generation = backend.generate(prefix, max_new, Some(&mut hook))?;
    Ok(SteeredRun {
        generation,
        report: hook.into_report(),
    })
}

/// Positive steering with `spec` at its (single or multiple) layers.
pub fn apply_steering<B: Backend + ?Sized>(
    backend: &B,
    prefix: &[u32],
    max_new: usize,
    spec: &SteeringSpec,
    naming: &Naming,
) -> Result<SteeredRun, SteeringError> {
    spec.validate(backend.hidden_dim(), backend.num_layers())?;
    run_intervention(
        backend,
        prefix,
        max_new,
        spec.intervention(),
        spec.window(),
        &same_table(&spec.layers, &spec.vectors),
        naming,
    )
}

/// Replaces matched hidden states with the layer's symbolic vectors (after
/// `control`) at every layer in `layers`.
#[allow(clippy::too_many_arguments)]
pub fn apply_patching<B: Backend + ?Sized>(
    backend: &B,
    prefix: &[u32],
    max_new: usize,
    window: Range<usize>,
    layers: RangeInclusive<usize>,
    tables: &LayerTables,
    control: &Control,
    naming: &Naming,
) -> Result<SteeredRun, SteeringError> {
    let tables = select_layers(tables, layers, backend.num_layers())?;
    let tables = control.tables(&tables)?;
    run_intervention(backend, prefix, max_new, Intervention::Patch, window, &tables, naming)
}

/// Subtracts the layer's centered in-naming vectors (after `control`) at
/// matched positions on every layer in `layers`.
#[allow(clippy::too_many_arguments)]
pub fn apply_negative<B: Backend + ?Sized>(
    backend: &B,
    prefix: &[u32],
    max_new: usize,
    window: Range<usize>,
    layers: RangeInclusive<usize>,
    centered: &LayerTables,
    control: &Control,
    naming: &Naming,
) -> Result<SteeredRun, SteeringError> {
    let tables = select_layers(centered, layers, backend.num_layers())?;
    let tables = control.tables(&tables)?;
    run_intervention(
        backend,
        prefix,
        max_new,
        Intervention::Subtract,
        window,
        &tables,
        naming,
    )
}

/// The tables of every layer in `range`, each of which must be present.
fn select_layers(
    tables: &LayerTables,
    range: RangeInclusive<usize>,
    num_layers: usize,
) -> Result<LayerTables, SteeringError> {
    layer_set(range, num_layers)?
        .into_iter()
        .map(|l| {
            tables
                .get(&l)
                .map(|t| (l, t.clone()))
                .ok_or_else(|| SteeringError::InvalidSpec(format!("no vectors for layer {l}")))
        })
        .collect()
}

/// `range` as a set, checked against `1..=num_layers`.
pub fn layer_set(range: RangeInclusive<usize>, num_layers: usize) -> Result<BTreeSet<usize>, SteeringError> {
    if range.is_empty() || *range.start() == 0 || *range.end() > num_layers {
        return Err(SteeringError::InvalidSpec(format!(
            "layer range {range:?} not within 1..={num_layers}"
        )));
    }
    Ok(range.collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn steer_update_edges() {
        let h = [3.0, -4.0, 1.0];
        let v = [0.5, 0.5, -2.0];
        assert_eq!(steer_update(&h, &v, 1.0).unwrap(), h.to_vec());
        let full = steer_update(&h, &v, 0.0).unwrap();
        let k = norm(&h) / norm(&v);
        for (a, b) in full.iter().zip(v) {
            assert_relative_eq!(*a, b * k, max_relative = 1e-14);
        }
        let mid = steer_update(&h, &v, DEFAULT_SCALE).unwrap();
        assert_relative_eq!(norm(&mid), norm(&h), max_relative = 1e-12);
    }

    #[test]
    fn steer_update_errors() {
        assert!(matches!(
            steer_update(&[0.0, 0.0], &[1.0, 0.0], 0.5),
            Err(SteeringError::ZeroHidden)
        ));
        // s h + (1 - s) v = 0 with s = 1/2 and v = -h
        assert!(matches!(
            steer_update(&[1.0, 2.0], &[-1.0, -2.0], 0.5),
            Err(SteeringError::DegenerateMix)
        ));
    }

    #[test]
    fn interventions() {
        let mut h = [1.0f32, 2.0];
        Intervention::Subtract.apply(&mut h, &[0.5, 0.5]).unwrap();
        assert_eq!(h, [0.5, 1.5]);
        Intervention::Patch.apply(&mut h, &[7.0, -1.0]).unwrap();
        assert_eq!(h, [7.0, -1.0]);
    }

    #[test]
    fn spec_json_and_validation() {
        let spec = SteeringSpec {
            vector_kind: VectorKind::CrossNaming,
            scale: DEFAULT_SCALE,
            t_start: 1500,
            t_end: 2500,
            layers: BTreeSet::from([20]),
            vectors: ConceptTable::from([(Concept::Stack, vec![0.0; 4])]),
            seed: 3,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"vector_kind\":\"cross-naming\""));
        assert_eq!(serde_json::from_str::<SteeringSpec>(&json).unwrap(), spec);
        assert!(spec.validate(4, 64).is_ok());
        assert!(matches!(
            spec.validate(5, 64),
            Err(SteeringError::DimensionMismatch { .. })
        ));
        assert!(spec.validate(4, 10).is_err());
        let empty = SteeringSpec { t_end: 1500, ..spec };
        assert!(empty.validate(4, 64).is_err());
    }

    #[test]
    fn layer_ranges() {
        assert_eq!(layer_set(10..=20, 64).unwrap().len(), 11);
        assert!(layer_set(0..=3, 8).is_err());
        assert!(layer_set(5..=9, 8).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(layer_set(empty, 8).is_err());
        assert_eq!(layer_set(8..=8, 8).unwrap(), BTreeSet::from([8]));
    }
}
