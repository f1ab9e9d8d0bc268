// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concept representations from activation dumps, and their geometry.
//!
//! A raw representation of concept `a` averages, for every trace in a batch,
//! the hidden states of `a`'s matched tokens inside `[T - w, T)`, then
//! averages those per-sequence means. Centering subtracts the mean over the
//! concept's class (actions or predicates, never mixed), and a cross-naming
//! representation averages centered ones over namings.

mod curves;
mod pca;

pub use curves::{convergence_curve, write_curve_csv, CurvePoint, NamingBatch};
pub use pca::{pca_project, write_pca_csv, Pca};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscation::{Concept, ConceptClass, Naming};
use crate::trace::{match_concept, ActivationDump, TraceError};

/// Concept -> vector, the common currency of extraction and steering.
pub type ConceptTable = BTreeMap<Concept, Vec<f64>>;

#[derive(Debug, Error)]
pub enum RepError {
    #[error("invalid extraction spec: {0}")]
    InvalidSpec(String),
    #[error("no occurrences of {0:?} in the window")]
    NoOccurrences(Concept),
    #[error("incomplete {class} set: missing {missing:?}")]
    IncompleteConceptSet { class: ConceptClass, missing: Vec<Concept> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("representations of different concepts cannot be averaged: {0:?} and {1:?}")]
    MixedConcepts(Concept, Concept),
    #[error("empty input set")]
    EmptySet,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("all points are identical")]
    DegenerateInput,
    #[error("invalid component count {k} for {count} points in dimension {dim}")]
    InvalidK { k: usize, count: usize, dim: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Where in a batch of traces to read representations.
#[derive(Debug, Clone)]
pub struct ExtractionSpec<'a> {
    pub naming: &'a Naming,
    pub layer: usize,
    /// Token position `T`; the window is `[T - w, T)`.
    pub timestamp: usize,
    pub window: usize,
    pub batch: Vec<&'a ActivationDump>,
}

impl ExtractionSpec<'_> {
    pub fn validate(&self) -> Result<(), RepError> {
        let bad = |m: String| Err(RepError::InvalidSpec(m));
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.timestamp < self.window {
            return bad(format!("timestamp {} is before window {}", self.timestamp, self.window));
        }
        for (i, dump) in self.batch.iter().enumerate() {
            if dump.layer(self.layer).is_err() {
                return bad(format!("layer {} not stored in dump {i}", self.layer));
            }
        }
        Ok(())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            naming: self.naming.id(),
            layer: self.layer,
            timestamp: self.timestamp,
            window: self.window,
            batch_size: self.batch.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub naming: u32,
    pub layer: usize,
    pub timestamp: usize,
    pub window: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepKind {
    Raw,
    Centered,
    CrossNaming,
    Symbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRepresentation {
    pub concept: Concept,
    pub kind: RepKind,
    pub vector: Vec<f64>,
    pub provenance: Option<Provenance>,
    /// Sequences that contributed; summed over namings for cross-naming.
    pub num_sequences: usize,
}

/// Raw representation of `concept`. Windows running past a trace's end are
/// clipped to it.
pub fn extract(spec: &ExtractionSpec<'_>, concept: Concept) -> Result<ConceptRepresentation, RepError> {
    spec.validate()?;
    let word = spec.naming.word(concept);
    let start = spec.timestamp - spec.window;
    let mut sum: Option<Vec<f64>> = None;
    let mut sequences = 0;
    for dump in &spec.batch {
        let end = spec.timestamp.min(dump.num_tokens());
        if end <= start {
            continue;
        }
        let layer = dump.layer(spec.layer)?;
        for m in match_concept(dump, concept, word, start..end) {
            let d = layer.cols();
            let mut seq = vec![0.0f64; d];
            for &p in &m.positions {
                for (acc, &x) in seq.iter_mut().zip(layer.row(p)) {
                    *acc += f64::from(x);
                }
            }
            let k = m.positions.len() as f64;
            let total = sum.get_or_insert_with(|| vec![0.0; d]);
            if total.len() != d {
                return Err(RepError::DimensionMismatch {
                    expected: total.len(),
                    found: d,
                });
            }
            for (t, s) in total.iter_mut().zip(&seq) {
                *t += s / k;
            }
            sequences += 1;
        }
    }
    let sum = sum.ok_or(RepError::NoOccurrences(concept))?;
    Ok(ConceptRepresentation {
        concept,
        kind: RepKind::Raw,
        vector: sum.into_iter().map(|v| v / sequences as f64).collect(),
        provenance: Some(spec.provenance()),
        num_sequences: sequences,
    })
}

/// Raw representations of every concept in `class`.
pub fn extract_class(
    spec: &ExtractionSpec<'_>,
    class: ConceptClass,
) -> Result<BTreeMap<Concept, ConceptRepresentation>, RepError> {
    class.members().iter().map(|&c| Ok((c, extract(spec, c)?))).collect()
}

fn check_dims<'a>(vectors: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<usize, RepError> {
    let mut it = vectors.into_iter();
    let d = it.next().ok_or(RepError::EmptySet)?.len();
    for v in it {
        if v.len() != d {
            return Err(RepError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(d)
}

fn mean_of<'a>(vectors: impl IntoIterator<Item = &'a Vec<f64>> + Clone) -> Result<Vec<f64>, RepError> {
    let d = check_dims(vectors.clone())?;
    let mut mean = vec![0.0; d];
    let mut n = 0usize;
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
        n += 1;
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(mean)
}

/// The classes touched by `concepts`, each of which must be complete.
fn complete_classes<'a>(concepts: impl Iterator<Item = &'a Concept> + Clone) -> Result<Vec<ConceptClass>, RepError> {
    let mut classes = Vec::new();
    for class in [ConceptClass::Actions, ConceptClass::Predicates] {
        if !concepts.clone().any(|c| c.class() == class) {
            continue;
        }
        let missing: Vec<Concept> = class
            .members()
            .iter()
            .copied()
            .filter(|m| !concepts.clone().any(|c| c == m))
            .collect();
        if !missing.is_empty() {
            return Err(RepError::IncompleteConceptSet { class, missing });
        }
        classes.push(class);
    }
    if classes.is_empty() {
        return Err(RepError::EmptySet);
    }
    Ok(classes)
}

/// Mean of each complete class present in `table`.
pub fn class_means(table: &ConceptTable) -> Result<BTreeMap<ConceptClass, Vec<f64>>, RepError> {
    complete_classes(table.keys())?
        .into_iter()
        .map(|class| Ok((class, mean_of(class.members().iter().map(|c| &table[c]))?)))
        .collect()
}

/// Subtracts each class's unweighted mean from its members.
pub fn center_table(table: &ConceptTable) -> Result<ConceptTable, RepError> {
    let means = class_means(table)?;
    Ok(table
        .iter()
        .map(|(c, v)| {
            let m = &means[&c.class()];
            (*c, v.iter().zip(m).map(|(x, m)| x - m).collect())
        })
        .collect())
}

pub fn center(
    reps: &BTreeMap<Concept, ConceptRepresentation>,
) -> Result<BTreeMap<Concept, ConceptRepresentation>, RepError> {
    let table: ConceptTable = reps.iter().map(|(c, r)| (*c, r.vector.clone())).collect();
    let centered = center_table(&table)?;
    Ok(reps
        .iter()
        .map(|(c, r)| {
            let rep = ConceptRepresentation {
                kind: RepKind::Centered,
                vector: centered[c].clone(),
                ..r.clone()
            };
            (*c, rep)
        })
        .collect())
}

/// Unweighted mean of one concept's representations across namings.
pub fn cross_naming_average(reps: &BTreeMap<u32, ConceptRepresentation>) -> Result<ConceptRepresentation, RepError> {
    let first = reps.values().next().ok_or(RepError::EmptySet)?;
    if let Some(other) = reps.values().find(|r| r.concept != first.concept) {
        return Err(RepError::MixedConcepts(first.concept, other.concept));
    }
    let vector = mean_of(reps.values().map(|r| &r.vector))?;
    Ok(ConceptRepresentation {
        concept: first.concept,
        kind: RepKind::CrossNaming,
        vector,
        provenance: first.provenance.map(|p| Provenance { naming: 0, ..p }),
        num_sequences: reps.values().map(|r| r.num_sequences).sum(),
    })
}

/// [`cross_naming_average`] for every concept of per-naming tables.
pub fn cross_naming_table(per_naming: &BTreeMap<u32, ConceptTable>) -> Result<ConceptTable, RepError> {
    let first = per_naming.values().next().ok_or(RepError::EmptySet)?;
    first
        .keys()
        .map(|c| {
            let vs: Vec<&Vec<f64>> = per_naming
                .values()
                .map(|t| {
                    t.get(c).ok_or(RepError::IncompleteConceptSet {
                        class: c.class(),
                        missing: vec![*c],
                    })
                })
                .collect::<Result<_, _>>()?;
            Ok((*c, mean_of(vs.iter().copied())?))
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, RepError> {
    if u.len() != v.len() {
        return Err(RepError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(RepError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{DumpManifest, LayerMatrix};
    use approx::assert_abs_diff_eq;

    /// Tokens are whole words; `rows[i]` is the layer-1 state of token `i`.
    pub(crate) fn word_dump(words: &[&str], rows: &[Vec<f32>]) -> ActivationDump {
        let d = rows[0].len();
        let manifest = DumpManifest {
            model_name: "fixture".into(),
            num_layers: 1,
            hidden_dim: d,
            capture_point: String::new(),
            tokens: words.iter().map(|w| format!(" {w}")).collect(),
            token_ids: (0..words.len() as u32).collect(),
        };
        let data = rows.concat();
        let layers = BTreeMap::from([(1, LayerMatrix::new(words.len(), d, data).unwrap())]);
        ActivationDump::new(manifest, layers).unwrap()
    }

    fn relabel(dump: ActivationDump, tokens: &[&str]) -> ActivationDump {
        let mut manifest = dump.manifest().clone();
        manifest.tokens = tokens.iter().map(|t| t.to_string()).collect();
        let layers = dump.layers().map(|(l, m)| (l, m.clone())).collect();
        ActivationDump::new(manifest, layers).unwrap()
    }

    fn spec<'a>(naming: &'a Naming, batch: Vec<&'a ActivationDump>, t: usize, w: usize) -> ExtractionSpec<'a> {
        ExtractionSpec {
            naming,
            layer: 1,
            timestamp: t,
            window: w,
            batch,
        }
    }

    #[test]
    fn mean_of_means_not_grand_mean() {
        let id = Naming::identity();
        // a match at index 0 has no extension token: one position, value 1
        let a = word_dump(&["stack", "z"], &[vec![1.0], vec![100.0]]);
        // a two-token match plus its extension token: three positions, mean 6
        let mut b = word_dump(&["x", "st", "ack"], &[vec![2.0], vec![4.0], vec![12.0]]);
        b = relabel(b, &[" x", " st", "ack"]);
        let r = extract(&spec(&id, vec![&a, &b], 3, 3), Concept::Stack).unwrap();
        assert_eq!(r.num_sequences, 2);
        let mean_of_means = (1.0 + 6.0) / 2.0;
        let grand_mean = (1.0 + 2.0 + 4.0 + 12.0) / 4.0;
        assert_abs_diff_eq!(r.vector[0], mean_of_means, epsilon = 1e-12);
        assert!((r.vector[0] - grand_mean).abs() > 1.0);
    }

    #[test]
    fn sequences_within_one_trace() {
        let id = Naming::identity();
        // matches [0], [1, 2] and [2, 3]: an extension token may be shared
        let t = word_dump(
            &["stack", "q", "stack", "stack"],
            &[vec![1.0], vec![2.0], vec![4.0], vec![12.0]],
        );
        let r = extract(&spec(&id, vec![&t], 4, 4), Concept::Stack).unwrap();
        assert_eq!(r.num_sequences, 3);
        assert_abs_diff_eq!(r.vector[0], (1.0 + 3.0 + 8.0) / 3.0, epsilon = 1e-12);
        let none = word_dump(&["a", "b"], &[vec![0.0], vec![0.0]]);
        assert!(matches!(
            extract(&spec(&id, vec![&none], 2, 2), Concept::Stack),
            Err(RepError::NoOccurrences(Concept::Stack))
        ));
    }

    #[test]
    fn spec_validation() {
        let id = Naming::identity();
        let a = word_dump(&["stack"], &[vec![1.0]]);
        assert!(spec(&id, vec![&a], 1, 0).validate().is_err());
        assert!(spec(&id, vec![&a], 1, 2).validate().is_err());
        let mut s = spec(&id, vec![&a], 1, 1);
        s.layer = 3;
        assert!(s.validate().is_err());
        // window clipped to the trace
        let r = extract(&spec(&id, vec![&a], 50, 50), Concept::Stack).unwrap();
        assert_eq!(r.vector, vec![1.0]);
    }

    fn table(pairs: &[(Concept, Vec<f64>)]) -> ConceptTable {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn centering() {
        let t = table(&[
            (Concept::PickUp, vec![1.0, 0.0]),
            (Concept::PutDown, vec![3.0, 2.0]),
            (Concept::Stack, vec![0.0, 4.0]),
            (Concept::Unstack, vec![0.0, 2.0]),
        ]);
        let c = center_table(&t).unwrap();
        // class mean (1, 2)
        assert_eq!(c[&Concept::PickUp], vec![0.0, -2.0]);
        assert_eq!(c[&Concept::PutDown], vec![2.0, 0.0]);
        assert_eq!(center_table(&c).unwrap(), c);
        let mut partial = t.clone();
        partial.remove(&Concept::Stack);
        assert!(matches!(
            center_table(&partial),
            Err(RepError::IncompleteConceptSet { missing, .. }) if missing == vec![Concept::Stack]
        ));
    }

    #[test]
    fn cross_naming() {
        let rep = |n: u32, v: Vec<f64>| {
            (
                n,
                ConceptRepresentation {
                    concept: Concept::On,
                    kind: RepKind::Centered,
                    vector: v,
                    provenance: None,
                    num_sequences: 2,
                },
            )
        };
        let one = BTreeMap::from([rep(1, vec![1.0, -2.0])]);
        assert_eq!(cross_naming_average(&one).unwrap().vector, vec![1.0, -2.0]);
        let opposite = BTreeMap::from([rep(1, vec![1.0, -2.0]), rep(2, vec![-1.0, 2.0])]);
        let avg = cross_naming_average(&opposite).unwrap();
        assert_eq!(avg.vector, vec![0.0, 0.0]);
        assert_eq!(avg.num_sequences, 4);
        assert_eq!(avg.kind, RepKind::CrossNaming);
        assert!(matches!(
            cross_naming_average(&BTreeMap::new()),
            Err(RepError::EmptySet)
        ));
    }

    #[test]
    fn cosines() {
        let v = [0.3, -1.2, 2.0];
        assert_abs_diff_eq!(cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(cosine(&v, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(RepError::ZeroVector)));
    }
}
