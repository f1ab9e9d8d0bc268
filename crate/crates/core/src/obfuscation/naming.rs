// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tables::{ACTION_WORDS, PREDICATE_WORDS};
use super::{Concept, ConceptClass};

/// Ids of the built-in Mystery namings.
pub const BUILTIN_IDS: std::ops::RangeInclusive<u32> = 1..=20;

#[derive(Debug, Error)]
pub enum NamingError {
    #[error("unknown naming {0} (built-ins are 1..=20, 0 is the identity naming)")]
    UnknownNaming(u32),
    #[error("{class} map must cover exactly {expected:?}")]
    WrongKeys {
        class: ConceptClass,
        expected: Vec<Concept>,
    },
    #[error("surface word {0:?} is used twice")]
    DuplicateWord(String),
    #[error("invalid surface word {0:?}")]
    InvalidWord(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad naming json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A bijective map from canonical actions and predicates to surface words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NamingRepr", into = "NamingRepr")]
pub struct Naming {
    id: u32,
    action_map: BTreeMap<Concept, String>,
    predicate_map: BTreeMap<Concept, String>,
}

#[derive(Serialize, Deserialize)]
struct NamingRepr {
    id: u32,
    action_map: BTreeMap<Concept, String>,
    predicate_map: BTreeMap<Concept, String>,
}

impl TryFrom<NamingRepr> for Naming {
    type Error = NamingError;

    fn try_from(r: NamingRepr) -> Result<Self, Self::Error> {
        Naming::new(r.id, r.action_map, r.predicate_map)
    }
}

impl From<Naming> for NamingRepr {
    fn from(n: Naming) -> Self {
        NamingRepr {
            id: n.id,
            action_map: n.action_map,
            predicate_map: n.predicate_map,
        }
    }
}

fn normalize(word: &str) -> String {
    word.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Naming {
    pub fn new(
        id: u32,
        action_map: BTreeMap<Concept, String>,
        predicate_map: BTreeMap<Concept, String>,
    ) -> Result<Self, NamingError> {
        for (class, map) in [
            (ConceptClass::Actions, &action_map),
            (ConceptClass::Predicates, &predicate_map),
        ] {
            if !map.keys().copied().eq(class.members().iter().copied()) {
                return Err(NamingError::WrongKeys {
                    class,
                    expected: class.members().to_vec(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for word in action_map.values().chain(predicate_map.values()) {
            let norm = normalize(word);
            let ok = !norm.is_empty()
                && norm
                    .split(' ')
                    .all(|w| w != "block" && w.chars().all(|c| c.is_alphanumeric() || c == '-'));
            if !ok {
                return Err(NamingError::InvalidWord(word.clone()));
            }
            if !seen.insert(norm) {
                return Err(NamingError::DuplicateWord(word.clone()));
            }
        }
        Ok(Self {
            id,
            action_map,
            predicate_map,
        })
    }

    /// The unobfuscated vocabulary, id 0.
    pub fn identity() -> Self {
        Self::from_rows(
            0,
            ["pick up", "put down", "stack", "unstack"],
            ["ontable", "clear", "handempty", "holding", "on"],
        )
    }

    fn from_rows(id: u32, actions: [&str; 4], predicates: [&str; 5]) -> Self {
        let action_map = Concept::ACTIONS
            .into_iter()
            .zip(actions)
            .map(|(c, w)| (c, w.to_owned()))
            .collect();
        let predicate_map = Concept::PREDICATES
            .into_iter()
            .zip(predicates)
            .map(|(c, w)| (c, w.to_owned()))
            .collect();
        Self::new(id, action_map, predicate_map).expect("built-in tables are injective")
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn is_identity(&self) -> bool {
        self.id == 0
    }

    pub fn word(&self, concept: Concept) -> &str {
        match concept.class() {
            ConceptClass::Actions => &self.action_map[&concept],
            ConceptClass::Predicates => &self.predicate_map[&concept],
        }
    }

    pub fn action_map(&self) -> &BTreeMap<Concept, String> {
        &self.action_map
    }

    pub fn predicate_map(&self) -> &BTreeMap<Concept, String> {
        &self.predicate_map
    }

    /// Inverts a surface action word (case and spacing insensitive).
    pub fn action_for_word(&self, word: &str) -> Option<Concept> {
        let norm = normalize(word);
        self.action_map
            .iter()
            .find(|(_, w)| normalize(w) == norm)
            .map(|(c, _)| *c)
    }

    /// `(concept, surface word)` for every concept of a class.
    pub fn surface_words(&self, class: ConceptClass) -> Vec<(Concept, &str)> {
        class.members().iter().map(|&c| (c, self.word(c))).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NamingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NamingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NamingError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| NamingError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Built-in Mystery naming `id` (1..=20), or the identity naming for 0.
pub fn builtin_naming(id: u32) -> Result<Naming, NamingError> {
    if id == 0 {
        return Ok(Naming::identity());
    }
    if !BUILTIN_IDS.contains(&id) {
        return Err(NamingError::UnknownNaming(id));
    }
    let row = (id - 1) as usize;
    Ok(Naming::from_rows(id, ACTION_WORDS[row], PREDICATE_WORDS[row]))
}

pub fn builtin_namings() -> Vec<Naming> {
    BUILTIN_IDS.map(|id| builtin_naming(id).expect("built-in")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        assert_eq!(builtin_naming(1).unwrap().word(Concept::PickUp), "attack");
        assert_eq!(builtin_naming(3).unwrap().word(Concept::PickUp), "tltezi");
        assert_eq!(builtin_naming(10).unwrap().word(Concept::Clear), "puzzle");
        assert_eq!(builtin_naming(1).unwrap().word(Concept::Holding), "craves");
        assert_eq!(builtin_naming(1).unwrap().word(Concept::On), "pain");
        assert_eq!(builtin_naming(20).unwrap().word(Concept::Unstack), "sprill");
    }

    #[test]
    fn unknown_ids() {
        assert!(matches!(builtin_naming(21), Err(NamingError::UnknownNaming(21))));
        assert!(builtin_naming(0).unwrap().is_identity());
    }

    #[test]
    fn all_builtins_load() {
        assert_eq!(builtin_namings().len(), 20);
    }

    #[test]
    fn duplicate_words_are_rejected() {
        let n = builtin_naming(1).unwrap();
        let mut actions = n.action_map().clone();
        actions.insert(Concept::PutDown, "Attack".into());
        assert!(matches!(
            Naming::new(99, actions, n.predicate_map().clone()),
            Err(NamingError::DuplicateWord(_))
        ));
        // an action word reused as a predicate word
        let mut preds = n.predicate_map().clone();
        preds.insert(Concept::On, "feast".into());
        assert!(matches!(
            Naming::new(99, n.action_map().clone(), preds),
            Err(NamingError::DuplicateWord(_))
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let n = builtin_naming(7).unwrap();
        let json = serde_json::to_string(&n).unwrap();
        assert!(json.contains(r#""pick-up":"explore""#));
        assert_eq!(serde_json::from_str::<Naming>(&json).unwrap(), n);
        let dup = json.replace("ripen", "explore");
        assert!(serde_json::from_str::<Naming>(&dup).is_err());
        let missing = json.replace(r#""pick-up":"explore","#, "");
        assert!(serde_json::from_str::<Naming>(&missing).is_err());
    }

    #[test]
    fn action_words_invert() {
        let n = Naming::identity();
        assert_eq!(n.action_for_word("Pick  Up"), Some(Concept::PickUp));
        assert_eq!(
            builtin_naming(1).unwrap().action_for_word("FEAST"),
            Some(Concept::Unstack)
        );
        assert_eq!(n.action_for_word("attack"), None);
    }
}
