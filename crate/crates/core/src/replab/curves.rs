// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{center_table, cosine, extract_class, ConceptTable, ExtractionSpec, RepError};
use crate::obfuscation::{Concept, ConceptClass, Naming};
use crate::trace::ActivationDump;

/// The traces of one naming.
#[derive(Debug, Clone)]
pub struct NamingBatch<'a> {
    pub naming: &'a Naming,
    pub dumps: Vec<&'a ActivationDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub timestamp: usize,
    pub concept: Concept,
    /// Mean over namings of cos(centered rep of `concept`, reference of `concept`).
    pub same_concept: f64,
    /// Mean over namings and over other concepts `b` of cos(rep, reference of `b`).
    pub cross_concept: f64,
    /// Namings with a complete concept set at this timestamp.
    pub namings: usize,
}

/// Similarity of centered in-naming representations to `reference` at every
/// multiple of `stride` from `window` up to the longest trace.
///
/// A naming missing any concept of `class` at a timestamp is left out there;
/// timestamps where every naming is left out produce no rows.
pub fn convergence_curve(
    batches: &[NamingBatch<'_>],
    layer: usize,
    window: usize,
    class: ConceptClass,
    reference: &ConceptTable,
    stride: usize,
) -> Result<Vec<CurvePoint>, RepError> {
    if stride == 0 {
        return Err(RepError::InvalidSpec("stride must be at least 1".into()));
    }
    let members = class.members();
    let missing: Vec<Concept> = members.iter().copied().filter(|c| !reference.contains_key(c)).collect();
    if !missing.is_empty() {
        return Err(RepError::IncompleteConceptSet { class, missing });
    }
    let longest = batches
        .iter()
        .flat_map(|b| b.dumps.iter().map(|d| d.num_tokens()))
        .max()
        .unwrap_or(0);
    let timestamps: Vec<usize> = (1..)
        .map(|i| i * stride)
        .take_while(|&t| t <= longest)
        .filter(|&t| t >= window)
        .collect();

    let per_t: Vec<Vec<CurvePoint>> = timestamps
        .par_iter()
        .map(|&t| curve_at(batches, layer, window, class, reference, t))
        .collect::<Result<_, _>>()?;
    Ok(per_t.into_iter().flatten().collect())
}

fn curve_at(
    batches: &[NamingBatch<'_>],
    layer: usize,
    window: usize,
    class: ConceptClass,
    reference: &ConceptTable,
    timestamp: usize,
) -> Result<Vec<CurvePoint>, RepError> {
    let members = class.members();
    let mut same = vec![0.0; members.len()];
    let mut cross = vec![0.0; members.len()];
    let mut used = 0;
    for batch in batches {
        let spec = ExtractionSpec {
            naming: batch.naming,
            layer,
            timestamp,
            window,
            batch: batch.dumps.clone(),
        };
        let raw = match extract_class(&spec, class) {
            Ok(raw) => raw,
            Err(RepError::NoOccurrences(_)) => continue,
            Err(e) => return Err(e),
        };
        let table: ConceptTable = raw.into_iter().map(|(c, r)| (c, r.vector)).collect();
        let centered = center_table(&table)?;
        for (i, a) in members.iter().enumerate() {
            let mut others = 0.0;
            for b in members.iter().filter(|b| *b != a) {
                others += cosine(&centered[a], &reference[b])?;
            }
            same[i] += cosine(&centered[a], &reference[a])?;
            cross[i] += others / (members.len() - 1) as f64;
        }
        used += 1;
    }
    if used == 0 {
        return Ok(Vec::new());
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(i, &concept)| CurvePoint {
            timestamp,
            concept,
            same_concept: same[i] / used as f64,
            cross_concept: cross[i] / used as f64,
            namings: used,
        })
        .collect())
}

/// Header: `timestamp,concept,same_concept,cross_concept,namings`.
pub fn write_curve_csv(points: &[CurvePoint], writer: impl Write) -> Result<(), RepError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
