// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

use super::{satisfies_goal, Action, Block, DomainError, Plan, Puzzle, State, MAX_BLOCKS};

/// Breadth-first search and state enumeration stop here (4051 hand-empty
/// states at six blocks).
pub const MAX_SEARCH_BLOCKS: usize = 6;

static STATE_SPACES: [OnceLock<Vec<State>>; MAX_BLOCKS] = [const { OnceLock::new() }; MAX_BLOCKS];

/// Every well-formed state over `n` blocks, sorted canonically.
///
/// Computed as the closure of "all blocks on the table" under the four
/// actions, so the result doubles as a connectivity witness.
pub fn enumerate_states(n: usize) -> Result<&'static [State], DomainError> {
    if n == 0 || n > MAX_SEARCH_BLOCKS {
        return Err(DomainError::SizeLimit(n));
    }
    Ok(STATE_SPACES[n - 1].get_or_init(|| {
        let towers: Vec<Vec<Block>> = Block::all(n).map(|b| vec![b]).collect();
        let start = State::from_stacks(n, &towers, None).expect("flat state is well-formed");
        let actions = Action::all(n);
        let mut seen = std::collections::HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for &a in &actions {
                if s.check(a).is_ok() {
                    let next = s.apply_unchecked(a);
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
        let mut all: Vec<State> = seen.into_iter().collect();
        all.sort();
        all
    }))
}

/// Shortest plan for `puzzle`. Ties are broken by the fixed action order of
/// [`Action::all`], so the result is deterministic.
pub fn bfs_solve(puzzle: &Puzzle) -> Result<Plan, DomainError> {
    let n = puzzle.block_count();
    if n > MAX_SEARCH_BLOCKS {
        return Err(DomainError::SizeLimit(n));
    }
    let start = puzzle.initial().clone();
    if satisfies_goal(&start, puzzle.goal()) {
        return Ok(Plan::default());
    }
    let actions = Action::all(n);
    let mut parent: HashMap<State, (State, Action)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        for &a in &actions {
            if s.check(a).is_err() {
                continue;
            }
            let next = s.apply_unchecked(a);
            if next == start || parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), (s.clone(), a));
            if satisfies_goal(&next, puzzle.goal()) {
                let mut plan = Vec::new();
                let mut cur = next;
                while let Some((prev, act)) = parent.get(&cur) {
                    plan.push(*act);
                    cur = prev.clone();
                }
                plan.reverse();
                return Ok(Plan(plan));
            }
            queue.push_back(next);
        }
    }
    unreachable!("the BlocksWorld state graph is strongly connected")
}
