// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DomainError, Reason, MAX_BLOCKS};

/// A block, identified by its index. Index 0 is labelled `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block(pub u8);

impl Block {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn label(self) -> char {
        char::from(b'A' + self.0)
    }

    pub fn from_label(label: char) -> Option<Self> {
        let up = label.to_ascii_uppercase();
        if up.is_ascii_uppercase() {
            Some(Block(up as u8 - b'A'))
        } else {
            None
        }
    }

    pub fn all(n: usize) -> impl Iterator<Item = Block> {
        (0..n as u8).map(Block)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl Serialize for Block {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_block(&text).map_err(serde::de::Error::custom)
    }
}

pub(super) fn parse_block(text: &str) -> Result<Block, DomainError> {
    let mut chars = text.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Block::from_label(c).ok_or_else(|| DomainError::Parse {
            kind: "block",
            text: text.to_owned(),
        }),
        _ => Err(DomainError::Parse {
            kind: "block",
            text: text.to_owned(),
        }),
    }
}

/// An ordered pair of distinct blocks: `top` rests directly on `below`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Above {
    top: Block,
    below: Block,
}

impl Above {
    pub fn new(top: Block, below: Block) -> Result<Self, DomainError> {
        if top == below {
            Err(DomainError::SelfLoop(top))
        } else {
            Ok(Self { top, below })
        }
    }

    pub fn top(self) -> Block {
        self.top
    }

    pub fn below(self) -> Block {
        self.below
    }
}

/// A ground atom. Variant order fixes the canonical sort order of a state,
/// which is also the order in which statements are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Clear(Block),
    HandEmpty,
    Holding(Block),
    On(Above),
    OnTable(Block),
}

impl Predicate {
    fn blocks(self) -> impl Iterator<Item = Block> {
        let (a, b) = match self {
            Predicate::Clear(x) | Predicate::Holding(x) | Predicate::OnTable(x) => (Some(x), None),
            Predicate::On(p) => (Some(p.top), Some(p.below)),
            Predicate::HandEmpty => (None, None),
        };
        a.into_iter().chain(b)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Clear(x) => write!(f, "clear({x})"),
            Predicate::HandEmpty => write!(f, "handempty"),
            Predicate::Holding(x) => write!(f, "holding({x})"),
            Predicate::On(p) => write!(f, "on({},{})", p.top, p.below),
            Predicate::OnTable(x) => write!(f, "ontable({x})"),
        }
    }
}

/// Splits `name(X,Y)` into the name and its block arguments.
fn split_call<'a>(text: &'a str, kind: &'static str) -> Result<(&'a str, Vec<Block>), DomainError> {
    let bad = || DomainError::Parse {
        kind,
        text: text.to_owned(),
    };
    let text = text.trim();
    match text.find('(') {
        None => Ok((text, Vec::new())),
        Some(open) => {
            let inner = text[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            let args = inner
                .split(',')
                .map(parse_block)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            Ok((text[..open].trim(), args))
        }
    }
}

impl FromStr for Predicate {
    type Err = DomainError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (name, args) = split_call(text, "predicate")?;
        let bad = || DomainError::Parse {
            kind: "predicate",
            text: text.to_owned(),
        };
        match (name.to_ascii_lowercase().as_str(), args.as_slice()) {
            ("clear", [x]) => Ok(Predicate::Clear(*x)),
            ("handempty", []) => Ok(Predicate::HandEmpty),
            ("holding", [x]) => Ok(Predicate::Holding(*x)),
            ("on", [x, y]) => Ok(Predicate::On(Above::new(*x, *y)?)),
            ("ontable", [x]) => Ok(Predicate::OnTable(*x)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    PickUp(Block),
    PutDown(Block),
    Stack(Block, Block),
    Unstack(Block, Block),
}

impl Action {
    /// Every action over `n` blocks, including ones that repeat a block.
    pub fn all(n: usize) -> Vec<Action> {
        let mut out = Vec::new();
        for x in Block::all(n) {
            out.push(Action::PickUp(x));
            out.push(Action::PutDown(x));
            for y in Block::all(n) {
                out.push(Action::Stack(x, y));
                out.push(Action::Unstack(x, y));
            }
        }
        out
    }

    pub fn blocks(self) -> (Block, Option<Block>) {
        match self {
            Action::PickUp(x) | Action::PutDown(x) => (x, None),
            Action::Stack(x, y) | Action::Unstack(x, y) => (x, Some(y)),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::PickUp(x) => write!(f, "pick-up({x})"),
            Action::PutDown(x) => write!(f, "put-down({x})"),
            Action::Stack(x, y) => write!(f, "stack({x},{y})"),
            Action::Unstack(x, y) => write!(f, "unstack({x},{y})"),
        }
    }
}

impl FromStr for Action {
    type Err = DomainError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (name, args) = split_call(text, "action")?;
        let action = match (name.to_ascii_lowercase().as_str(), args.as_slice()) {
            ("pick-up", [x]) => Action::PickUp(*x),
            ("put-down", [x]) => Action::PutDown(*x),
            ("stack", [x, y]) => Action::Stack(*x, *y),
            ("unstack", [x, y]) => Action::Unstack(*x, *y),
            _ => {
                return Err(DomainError::Parse {
                    kind: "action",
                    text: text.to_owned(),
                })
            }
        };
        if let (x, Some(y)) = action.blocks() {
            if x == y {
                return Err(DomainError::SelfLoop(x));
            }
        }
        Ok(action)
    }
}

/// Where a block currently rests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Support {
    Table,
    On(Block),
    Hand,
}

/// A well-formed BlocksWorld state over blocks `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    n: usize,
    preds: BTreeSet<Predicate>,
}

impl State {
    /// Builds a state from predicates, rejecting anything ill-formed.
    pub fn new(n: usize, preds: impl IntoIterator<Item = Predicate>) -> Result<Self, DomainError> {
        if n == 0 || n > MAX_BLOCKS {
            return Err(DomainError::BlockCount(n));
        }
        let state = Self {
            n,
            preds: preds.into_iter().collect(),
        };
        state.validate()?;
        Ok(state)
    }

    /// Builds a state from towers listed bottom to top, plus an optional
    /// held block. Every block must appear exactly once.
    pub fn from_stacks(n: usize, stacks: &[Vec<Block>], holding: Option<Block>) -> Result<Self, DomainError> {
        let mut preds = Vec::new();
        for stack in stacks {
            let Some((&bottom, _)) = stack.split_first() else {
                continue;
            };
            preds.push(Predicate::OnTable(bottom));
            for pair in stack.windows(2) {
                preds.push(Predicate::On(Above::new(pair[1], pair[0])?));
            }
            preds.push(Predicate::Clear(*stack.last().expect("nonempty")));
        }
        match holding {
            Some(x) => preds.push(Predicate::Holding(x)),
            None => preds.push(Predicate::HandEmpty),
        }
        let state = Self::new(n, preds)?;
        let placed = stacks.iter().map(Vec::len).sum::<usize>() + usize::from(holding.is_some());
        if placed != n {
            return Err(DomainError::IllFormed(format!(
                "{placed} block placements for {n} blocks"
            )));
        }
        Ok(state)
    }

    pub fn block_count(&self) -> usize {
        self.n
    }

    pub fn predicates(&self) -> impl Iterator<Item = Predicate> + '_ {
        self.preds.iter().copied()
    }

    pub fn contains(&self, p: Predicate) -> bool {
        self.preds.contains(&p)
    }

    pub fn holding(&self) -> Option<Block> {
        self.preds.iter().find_map(|p| match p {
            Predicate::Holding(x) => Some(*x),
            _ => None,
        })
    }

    pub fn hand_empty(&self) -> bool {
        self.preds.contains(&Predicate::HandEmpty)
    }

    pub(crate) fn support(&self, b: Block) -> Support {
        if self.contains(Predicate::Holding(b)) {
            return Support::Hand;
        }
        if self.contains(Predicate::OnTable(b)) {
            return Support::Table;
        }
        self.preds
            .iter()
            .find_map(|p| match p {
                Predicate::On(a) if a.top == b => Some(Support::On(a.below)),
                _ => None,
            })
            .expect("well-formed states place every block")
    }

    /// Towers, bottom to top, ordered by their bottom block.
    pub fn stacks(&self) -> Vec<Vec<Block>> {
        let mut stacks = Vec::new();
        for bottom in Block::all(self.n) {
            if self.support(bottom) != Support::Table {
                continue;
            }
            let mut tower = vec![bottom];
            let mut cur = bottom;
            while let Some(next) = self.block_on(cur) {
                tower.push(next);
                cur = next;
            }
            stacks.push(tower);
        }
        stacks
    }

    fn block_on(&self, below: Block) -> Option<Block> {
        self.preds.iter().find_map(|p| match p {
            Predicate::On(a) if a.below == below => Some(a.top),
            _ => None,
        })
    }

    fn validate(&self) -> Result<(), DomainError> {
        let n = self.n;
        let bad = |msg: String| Err(DomainError::IllFormed(msg));
        for p in &self.preds {
            for b in p.blocks() {
                if b.index() >= n {
                    return Err(DomainError::BlockOutOfRange(b, n));
                }
            }
        }
        let held: Vec<Block> = Block::all(n)
            .filter(|&b| self.contains(Predicate::Holding(b)))
            .collect();
        if held.len() > 1 {
            return bad(format!("holding {} blocks", held.len()));
        }
        if self.hand_empty() == !held.is_empty() {
            return bad("handempty must hold exactly when nothing is held".into());
        }
        let mut below_of = vec![None; n];
        let mut on_top_count = vec![0usize; n];
        for p in &self.preds {
            if let Predicate::On(a) = p {
                if below_of[a.top.index()].replace(a.below).is_some() {
                    return bad(format!("block {} rests on two blocks", a.top));
                }
                on_top_count[a.below.index()] += 1;
            }
        }
        for b in Block::all(n) {
            let places = usize::from(held.contains(&b))
                + usize::from(self.contains(Predicate::OnTable(b)))
                + usize::from(below_of[b.index()].is_some());
            if places != 1 {
                return bad(format!("block {b} has {places} positions"));
            }
            if on_top_count[b.index()] > 1 {
                return bad(format!("block {b} carries {} blocks", on_top_count[b.index()]));
            }
            let should_be_clear = !held.contains(&b) && on_top_count[b.index()] == 0;
            if self.contains(Predicate::Clear(b)) != should_be_clear {
                return bad(format!("clear({b}) is inconsistent"));
            }
            if below_of[b.index()].is_some_and(|y| held.contains(&y)) {
                return bad(format!("block {b} rests on the held block"));
            }
        }
        // Each block has one support, so following supports either reaches
        // the table/hand within n steps or loops.
        for start in Block::all(n) {
            let mut cur = start;
            for _ in 0..=n {
                match below_of[cur.index()] {
                    Some(next) => cur = next,
                    None => break,
                }
            }
            if below_of[cur.index()].is_some() {
                return bad(format!("cycle through block {start}"));
            }
        }
        Ok(())
    }

    /// Precondition check, reporting the first violated condition.
    pub fn check(&self, action: Action) -> Result<(), Reason> {
        let (x, y) = action.blocks();
        for b in std::iter::once(x).chain(y) {
            if b.index() >= self.n {
                return Err(Reason::BlockOutOfRange { block: b });
            }
        }
        if y == Some(x) {
            return Err(Reason::SameBlock { block: x });
        }
        let need = |p: Predicate, reason: Reason| {
            if self.contains(p) {
                Ok(())
            } else {
                Err(reason)
            }
        };
        match action {
            Action::PickUp(x) => {
                need(Predicate::HandEmpty, Reason::HandNotEmpty)?;
                need(Predicate::Clear(x), Reason::NotClear { block: x })?;
                need(Predicate::OnTable(x), Reason::NotOnTable { block: x })
            }
            Action::PutDown(x) => need(Predicate::Holding(x), Reason::NotHolding { block: x }),
            Action::Stack(x, y) => {
                need(Predicate::Holding(x), Reason::NotHolding { block: x })?;
                need(Predicate::Clear(y), Reason::NotClear { block: y })
            }
            Action::Unstack(x, y) => {
                need(Predicate::HandEmpty, Reason::HandNotEmpty)?;
                let on = Predicate::On(Above { top: x, below: y });
                need(on, Reason::NotOn { top: x, below: y })?;
                need(Predicate::Clear(x), Reason::NotClear { block: x })
            }
        }
    }

    pub fn apply(&self, action: Action) -> Result<State, DomainError> {
        self.check(action)
            .map_err(|reason| DomainError::Inapplicable { action, reason })?;
        Ok(self.apply_unchecked(action))
    }

    /// STRIPS update. Callers must have passed [`State::check`].
    pub(crate) fn apply_unchecked(&self, action: Action) -> State {
        use Predicate::*;
        let (del, add): (Vec<Predicate>, Vec<Predicate>) = match action {
            Action::PickUp(x) => (vec![Clear(x), OnTable(x), HandEmpty], vec![Holding(x)]),
            Action::PutDown(x) => (vec![Holding(x)], vec![Clear(x), OnTable(x), HandEmpty]),
            Action::Stack(x, y) => (
                vec![Holding(x), Clear(y)],
                vec![On(Above { top: x, below: y }), Clear(x), HandEmpty],
            ),
            Action::Unstack(x, y) => (
                vec![On(Above { top: x, below: y }), Clear(x), HandEmpty],
                vec![Holding(x), Clear(y)],
            ),
        };
        let mut preds = self.preds.clone();
        for p in &del {
            preds.remove(p);
        }
        preds.extend(add);
        State { n: self.n, preds }
    }
}

/// A conjunction of `on` atoms, kept sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Goal(Vec<Above>);

impl Goal {
    /// Rejects goals that no state can satisfy: a block on two blocks, two
    /// blocks on one block, or a cycle.
    pub fn new(atoms: Vec<Above>) -> Result<Self, DomainError> {
        let mut atoms = atoms;
        atoms.sort();
        atoms.dedup();
        let n = atoms
            .iter()
            .map(|a| a.top.index().max(a.below.index()) + 1)
            .max()
            .unwrap_or(0);
        let mut below_of = vec![None; n];
        let mut carried = vec![false; n];
        for a in &atoms {
            if below_of[a.top.index()].replace(a.below).is_some() {
                return Err(DomainError::BadGoal(format!("block {} placed twice", a.top)));
            }
            if std::mem::replace(&mut carried[a.below.index()], true) {
                return Err(DomainError::BadGoal(format!("block {} carries two blocks", a.below)));
            }
        }
        for start in 0..n {
            let mut cur = start;
            for _ in 0..=n {
                match below_of[cur] {
                    Some(next) => cur = Block::index(next),
                    None => break,
                }
            }
            if below_of[cur].is_some() {
                return Err(DomainError::BadGoal("cyclic goal".into()));
            }
        }
        Ok(Goal(atoms))
    }

    pub fn atoms(&self) -> &[Above] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
