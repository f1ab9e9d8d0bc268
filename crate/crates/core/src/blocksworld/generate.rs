// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{enumerate_states, satisfies_goal, DomainError, Goal, Predicate, Puzzle, State};

/// Samples a puzzle deterministically from `seed`.
///
/// The initial state is uniform over hand-empty arrangements of `n_blocks`
/// blocks. The goal is the `on` atoms of an independently drawn uniform
/// arrangement. Draws whose initial state already satisfies the goal
/// (including the empty goal) are rejected.
pub fn generate_puzzle(n_blocks: usize, seed: u64) -> Result<Puzzle, DomainError> {
    if !(2..=super::MAX_SEARCH_BLOCKS).contains(&n_blocks) {
        return Err(DomainError::SizeLimit(n_blocks));
    }
    let arrangements: Vec<&State> = enumerate_states(n_blocks)?.iter().filter(|s| s.hand_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let initial = arrangements[rng.random_range(0..arrangements.len())];
        let target = arrangements[rng.random_range(0..arrangements.len())];
        let goal = Goal::new(
            target
                .predicates()
                .filter_map(|p| match p {
                    Predicate::On(a) => Some(a),
                    _ => None,
                })
                .collect(),
        )?;
        if !satisfies_goal(initial, &goal) {
            return Puzzle::new(initial.clone(), goal);
        }
    }
}
