// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ActivationDump;
use crate::obfuscation::Concept;

/// Leading-space markers used by common subword vocabularies.
const SPACE_MARKERS: [char; 3] = ['\u{0120}', '\u{2581}', '\u{010A}'];

/// One occurrence of a concept's surface word: the matched token span plus
/// the token just before it (absent when the span starts at index 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMatch {
    pub concept: Concept,
    pub positions: Vec<usize>,
}

impl TokenMatch {
    pub fn first(&self) -> usize {
        self.positions[0]
    }

    pub fn last(&self) -> usize {
        *self.positions.last().expect("matches are nonempty")
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !SPACE_MARKERS.contains(&c)
}

/// Lowercased text with whitespace and space markers removed; both tokens
/// and surface words are compared in this form.
pub fn normalize_surface(text: &str) -> String {
    text.chars()
        .filter(|&c| !c.is_whitespace() && !SPACE_MARKERS.contains(&c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Leftmost, non-overlapping occurrences of `word` in `tokens`.
///
/// A span matches when its normalized tokens concatenate to the normalized
/// word, its first and last tokens are nonempty after normalization, and it
/// sits on word boundaries (no alphanumeric character runs into it from the
/// neighbouring tokens). Only matches whose reported positions (span plus
/// the preceding token) all lie inside `window` are returned.
pub fn match_tokens<S: AsRef<str>>(
    tokens: &[S],
    concept: Concept,
    word: &str,
    window: Range<usize>,
) -> Vec<TokenMatch> {
    let target = normalize_surface(word);
    if target.is_empty() {
        return Vec::new();
    }
    let norm: Vec<String> = tokens.iter().map(|t| normalize_surface(t.as_ref())).collect();
    let first_char = |i: usize| tokens[i].as_ref().chars().next();
    let last_char = |i: usize| tokens[i].as_ref().chars().next_back();
    let left_boundary =
        |i: usize| i == 0 || !first_char(i).is_some_and(is_word_char) || !last_char(i - 1).is_some_and(is_word_char);
    let right_boundary = |j: usize| j + 1 >= tokens.len() || !first_char(j + 1).is_some_and(is_word_char);

    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut matched_end = None;
        if !norm[i].is_empty() && target.starts_with(norm[i].as_str()) && left_boundary(i) {
            let mut acc = String::new();
            for (j, piece) in norm.iter().enumerate().skip(i) {
                acc.push_str(piece);
                if !target.starts_with(acc.as_str()) {
                    break;
                }
                if acc.len() == target.len() {
                    if right_boundary(j) {
                        matched_end = Some(j);
                    }
                    break;
                }
            }
        }
        match matched_end {
            Some(j) => {
                let start = i.saturating_sub(1);
                if window.start <= start && j < window.end {
                    out.push(TokenMatch {
                        concept,
                        positions: (start..=j).collect(),
                    });
                }
                i = j + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// [`match_tokens`] over a dump's token strings.
pub fn match_concept(dump: &ActivationDump, concept: Concept, word: &str, window: Range<usize>) -> Vec<TokenMatch> {
    match_tokens(dump.tokens(), concept, word, window)
}
