// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use fluidrep::blocksworld::{apply, enumerate_states, generate_puzzle, Action, Block, State};
use proptest::prelude::*;

#[test]
fn rules_agree_with_oracle_and_bfs_plans_verify() {
    common::verifier_oracle().unwrap();
}

#[test]
fn state_counts_match_known_sequence() {
    // towers of labelled blocks, with one block optionally held
    let counts: Vec<usize> = (1..=4).map(|n| enumerate_states(n).unwrap().len()).collect();
    assert_eq!(counts, [2, 5, 22, 125]);
}

#[test]
fn oracle_rejects_what_it_should() {
    let s = State::from_stacks(3, &[vec![Block(0), Block(1)], vec![Block(2)]], None).unwrap();
    let flat = common::Flat::of(&s);
    assert!(flat.step(Action::PickUp(Block(0))).is_none());
    assert!(flat.step(Action::Unstack(Block(1), Block(0))).is_some());
    assert!(flat.step(Action::Stack(Block(1), Block(1))).is_none());
    assert!(flat.step(Action::PutDown(Block(2))).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_walks_stay_in_state_space(seed in any::<u64>(), picks in prop::collection::vec(0usize..64, 1..30)) {
        let states = enumerate_states(4).unwrap();
        let mut s = generate_puzzle(4, seed).unwrap().initial().clone();
        let actions = Action::all(4);
        for k in picks {
            if let Ok(next) = apply(&s, actions[k % actions.len()]) {
                prop_assert!(states.contains(&next));
                prop_assert_eq!(common::Flat::of(&next), common::Flat::of(&s).step(actions[k % actions.len()]).unwrap());
                s = next;
            }
        }
    }
}
