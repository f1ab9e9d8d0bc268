// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

use super::{Concept, Naming};
use crate::blocksworld::{Action, Block, Plan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no [PLAN] ... [PLAN END] block found")]
    NoPlanBlock,
    #[error("unknown action word in line {0:?}")]
    UnknownActionWord(String),
    #[error("malformed plan line {0:?}")]
    MalformedLine(String),
}

const CONNECTIVES: [&str; 4] = ["from", "from on top of", "on top of", "on"];

/// Extracts the last `[PLAN]` ... `[PLAN END]` region of `text` and parses
/// each nonempty line as `<action words> Block X [<connective> Block Y]`.
pub fn parse_plan(text: &str, naming: &Naming) -> Result<Plan, ParseError> {
    // ASCII lowercasing keeps byte offsets aligned with `text`.
    let lower = text.to_ascii_lowercase();
    let end = lower.rfind("[plan end]").ok_or(ParseError::NoPlanBlock)?;
    let start = lower[..end].rfind("[plan]").ok_or(ParseError::NoPlanBlock)? + "[plan]".len();
    text[start..end]
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_line(l, naming))
        .collect()
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    let line = if digits > 0 && line[digits..].starts_with(['.', ')']) {
        &line[digits + 1..]
    } else {
        line
    };
    line.trim_start_matches(['-', '*', '•']).trim()
}

fn parse_line(line: &str, naming: &Naming) -> Result<Action, ParseError> {
    let malformed = || ParseError::MalformedLine(line.to_owned());
    let body = strip_list_marker(line).to_lowercase();
    let words: Vec<&str> = body
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-'))
        .filter(|w| !w.is_empty())
        .collect();

    let first = words.iter().position(|&w| w == "block").ok_or_else(malformed)?;
    if first == 0 {
        return Err(malformed());
    }
    let concept = naming
        .action_for_word(&words[..first].join(" "))
        .ok_or_else(|| ParseError::UnknownActionWord(line.to_owned()))?;
    let label = |w: Option<&&str>| -> Result<Block, ParseError> {
        let w = w.ok_or_else(malformed)?;
        let mut chars = w.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Block::from_label(c).ok_or_else(malformed),
            _ => Err(malformed()),
        }
    };
    let x = label(words.get(first + 1))?;
    let rest = &words[first + 2..];

    let y = if rest.is_empty() {
        None
    } else {
        let second = rest.iter().position(|&w| w == "block").ok_or_else(malformed)?;
        if !CONNECTIVES.contains(&rest[..second].join(" ").as_str()) || rest.len() != second + 2 {
            return Err(malformed());
        }
        Some(label(rest.get(second + 1))?)
    };

    match (concept, y) {
        (Concept::PickUp, None) => Ok(Action::PickUp(x)),
        (Concept::PutDown, None) => Ok(Action::PutDown(x)),
        (Concept::Stack, Some(y)) if y != x => Ok(Action::Stack(x, y)),
        (Concept::Unstack, Some(y)) if y != x => Ok(Action::Unstack(x, y)),
        _ => Err(malformed()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::prompt_example_plan;
    use crate::obfuscation::builtin_naming;

    const MYSTERY_PLAN: &str = "[PLAN]
feast Block C from Block A
succumb Block C
attack Block A
overcome Block A from Block C
attack Block B
overcome Block B from Block A
[PLAN END]";

    #[test]
    fn mystery_plan_maps_to_canonical_actions() {
        let plan = parse_plan(MYSTERY_PLAN, &builtin_naming(1).unwrap()).unwrap();
        assert_eq!(plan, prompt_example_plan());
    }

    #[test]
    fn missing_delimiters() {
        assert_eq!(
            parse_plan("feast Block C from Block A", &builtin_naming(1).unwrap()),
            Err(ParseError::NoPlanBlock)
        );
        assert_eq!(
            parse_plan("[PLAN] attack Block A", &builtin_naming(1).unwrap()),
            Err(ParseError::NoPlanBlock)
        );
    }

    #[test]
    fn last_block_wins() {
        let text = format!("draft:\n[PLAN]\nattack Block D\n[PLAN END]\nfinal:\n{MYSTERY_PLAN}");
        assert_eq!(parse_plan(&text, &builtin_naming(1).unwrap()).unwrap().len(), 6);
    }

    #[test]
    fn tolerant_formatting() {
        let n = Naming::identity();
        let text = "[plan]\n1. Unstack block C from on top of block A.\n- PUT DOWN Block C,\n  stack Block A on Block C\n[Plan End]";
        let plan = parse_plan(text, &n).unwrap();
        assert_eq!(
            plan.actions(),
            &[
                Action::Unstack(Block(2), Block(0)),
                Action::PutDown(Block(2)),
                Action::Stack(Block(0), Block(2))
            ]
        );
    }

    #[test]
    fn errors() {
        let n = builtin_naming(1).unwrap();
        assert!(matches!(
            parse_plan("[PLAN]\njump Block A\n[PLAN END]", &n),
            Err(ParseError::UnknownActionWord(_))
        ));
        for bad in [
            "attack Block A from Block B",
            "feast Block C",
            "feast Block C from Block C",
            "feast Block C beside Block A",
            "attack the red one",
            "attack Block",
        ] {
            let text = format!("[PLAN]\n{bad}\n[PLAN END]");
            assert!(
                matches!(parse_plan(&text, &n), Err(ParseError::MalformedLine(_))),
                "{bad}"
            );
        }
        assert_eq!(parse_plan("[PLAN]\n\n[PLAN END]", &n).unwrap(), Plan::default());
    }
}
