// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Intervention, LayerTables};
use crate::backend::{Backend, HiddenHook, Site};
use crate::obfuscation::{Concept, Naming};
use crate::trace::match_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Touch {
    pub layer: usize,
    pub position: usize,
    pub concept: Concept,
}

/// Every site an intervention modified, in visiting order, plus sites where
/// the edit was refused (for example a zero hidden state).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TouchReport {
    pub touches: Vec<Touch>,
    pub failures: Vec<(Touch, String)>,
}

impl TouchReport {
    pub fn sites(&self) -> BTreeSet<(usize, usize)> {
        self.touches.iter().map(|t| (t.layer, t.position)).collect()
    }

    pub fn positions(&self) -> BTreeSet<usize> {
        self.touches.iter().map(|t| t.position).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.touches.is_empty()
    }
}

/// Applies an [`Intervention`] at positions inside `window` that belong to
/// a matched occurrence of a concept, using the table of the layer being
/// visited. Layers without a table pass through.
///
/// Matching reruns whenever the known token sequence grows. A match whose
/// tokens are not all known yet is found only once they are, so generated
/// positions are edited only when their occurrence is complete by the time
/// they are processed.
pub struct ConceptHook<'a, B: Backend + ?Sized> {
    backend: &'a B,
    words: Vec<(Concept, String)>,
    tables: LayerTables,
    intervention: Intervention,
    window: Range<usize>,
    texts: Vec<String>,
    known: Vec<u32>,
    owner: HashMap<usize, Concept>,
    report: TouchReport,
}

impl<'a, B: Backend + ?Sized> ConceptHook<'a, B> {
    pub fn new(
        backend: &'a B,
        naming: &Naming,
        tables: LayerTables,
        intervention: Intervention,
        window: Range<usize>,
    ) -> Self {
        let concepts: BTreeSet<Concept> = tables.values().flat_map(|t| t.keys().copied()).collect();
        let words = concepts.into_iter().map(|c| (c, naming.word(c).to_owned())).collect();
        Self {
            backend,
            words,
            tables,
            intervention,
            window,
            texts: Vec::new(),
            known: Vec::new(),
            owner: HashMap::new(),
            report: TouchReport::default(),
        }
    }

    pub fn report(&self) -> &TouchReport {
        &self.report
    }

    pub fn into_report(self) -> TouchReport {
        self.report
    }

    fn refresh(&mut self, tokens: &[u32]) {
        if tokens.len() == self.known.len() && tokens == self.known.as_slice() {
            return;
        }
        let shared = self.known.iter().zip(tokens).take_while(|(a, b)| a == b).count();
        self.texts.truncate(shared);
        self.texts
            .extend(tokens[shared..].iter().map(|&t| self.backend.token_text(t)));
        self.known = tokens.to_vec();
        self.owner.clear();
        let end = self.window.end.min(tokens.len());
        if end <= self.window.start {
            return;
        }
        // concepts earlier in table order keep a shared extension token
        for (concept, word) in &self.words {
            for m in match_tokens(&self.texts, *concept, word, self.window.start..end) {
                for p in m.positions {
                    self.owner.entry(p).or_insert(*concept);
                }
            }
        }
    }
}

impl<B: Backend + ?Sized> HiddenHook for ConceptHook<'_, B> {
    fn wants_layer(&self, layer: usize) -> bool {
        self.tables.get(&layer).is_some_and(|t| !t.is_empty())
    }

    fn visit(&mut self, site: Site, tokens: &[u32], hidden: &mut [f32]) -> bool {
        if !self.window.contains(&site.position) || !self.wants_layer(site.layer) {
            return false;
        }
        self.refresh(tokens);
        let Some(&concept) = self.owner.get(&site.position) else {
            return false;
        };
        let Some(v) = self.tables[&site.layer].get(&concept) else {
            return false;
        };
        let touch = Touch {
            layer: site.layer,
            position: site.position,
            concept,
        };
        match self.intervention.apply(hidden, v) {
            Ok(()) => {
                self.report.touches.push(touch);
                true
            }
            Err(e) => {
                self.report.failures.push((touch, e.to_string()));
                false
            }
        }
    }
}
