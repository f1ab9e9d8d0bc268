// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON shapes. Atoms and actions are strings such as `"on(C,A)"` or
//! `"unstack(C,A)"`; blocks are labels `A`..`F`.
//!
//! ```json
//! {"blocks":3,
//!  "initial":["clear(B)","clear(C)","handempty","on(C,A)","ontable(A)","ontable(B)"],
//!  "goal":["on(A,C)","on(B,A)"]}
//! ```

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Action, Goal, Predicate, Puzzle, State};

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    blocks: usize,
    predicates: Vec<Predicate>,
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateRepr {
            blocks: self.block_count(),
            predicates: self.predicates().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = StateRepr::deserialize(d)?;
        State::new(repr.blocks, repr.predicates).map_err(D::Error::custom)
    }
}

impl Serialize for Goal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.atoms().iter().map(|&a| Predicate::On(a)))
    }
}

impl<'de> Deserialize<'de> for Goal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let atoms = Vec::<Predicate>::deserialize(d)?
            .into_iter()
            .map(|p| match p {
                Predicate::On(a) => Ok(a),
                other => Err(D::Error::custom(format!("goals hold only on-atoms, got {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Goal::new(atoms).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct PuzzleRepr {
    blocks: usize,
    initial: Vec<Predicate>,
    goal: Goal,
}

impl Serialize for Puzzle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PuzzleRepr {
            blocks: self.block_count(),
            initial: self.initial().predicates().collect(),
            goal: self.goal().clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Puzzle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PuzzleRepr::deserialize(d)?;
        let initial = State::new(repr.blocks, repr.initial).map_err(D::Error::custom)?;
        Puzzle::new(initial, repr.goal).map_err(D::Error::custom)
    }
}
