// SPDX-License-Identifier: MIT OR Apache-2.0

//! Namings (surface-word remappings of the domain vocabulary), prompt
//! rendering, and plan parsing.

mod naming;
mod parse;
mod prompt;
mod tables;

pub use naming::{builtin_naming, builtin_namings, Naming, NamingError, BUILTIN_IDS};
pub use parse::{parse_plan, ParseError};
pub use prompt::{render_example, render_plan_line, render_prompt, RelationalSlots, Template, TemplateKind};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A canonical action or predicate of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Concept {
    #[serde(rename = "pick-up")]
    PickUp,
    #[serde(rename = "put-down")]
    PutDown,
    #[serde(rename = "stack")]
    Stack,
    #[serde(rename = "unstack")]
    Unstack,
    #[serde(rename = "ontable")]
    OnTable,
    #[serde(rename = "clear")]
    Clear,
    #[serde(rename = "handempty")]
    HandEmpty,
    #[serde(rename = "holding")]
    Holding,
    #[serde(rename = "on")]
    On,
}

/// Actions and predicates are always handled as separate concept sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptClass {
    Actions,
    Predicates,
}

impl Concept {
    pub const ACTIONS: [Concept; 4] = [Concept::PickUp, Concept::PutDown, Concept::Stack, Concept::Unstack];
    pub const PREDICATES: [Concept; 5] = [
        Concept::OnTable,
        Concept::Clear,
        Concept::HandEmpty,
        Concept::Holding,
        Concept::On,
    ];
    pub const ALL: [Concept; 9] = [
        Concept::PickUp,
        Concept::PutDown,
        Concept::Stack,
        Concept::Unstack,
        Concept::OnTable,
        Concept::Clear,
        Concept::HandEmpty,
        Concept::Holding,
        Concept::On,
    ];

    pub fn class(self) -> ConceptClass {
        if Self::ACTIONS.contains(&self) {
            ConceptClass::Actions
        } else {
            ConceptClass::Predicates
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Concept::PickUp => "pick-up",
            Concept::PutDown => "put-down",
            Concept::Stack => "stack",
            Concept::Unstack => "unstack",
            Concept::OnTable => "ontable",
            Concept::Clear => "clear",
            Concept::HandEmpty => "handempty",
            Concept::Holding => "holding",
            Concept::On => "on",
        }
    }
}

impl ConceptClass {
    pub fn members(self) -> &'static [Concept] {
        match self {
            ConceptClass::Actions => &Concept::ACTIONS,
            ConceptClass::Predicates => &Concept::PREDICATES,
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Concept::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown concept {s:?}"))
    }
}

impl fmt::Display for ConceptClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptClass::Actions => "actions",
            ConceptClass::Predicates => "predicates",
        })
    }
}

impl FromStr for ConceptClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "actions" => Ok(ConceptClass::Actions),
            "predicates" => Ok(ConceptClass::Predicates),
            _ => Err(format!("unknown concept class {s:?}")),
        }
    }
}
