// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use fluidrep::blocksworld::{prompt_example_plan, Puzzle};
use fluidrep::obfuscation::{builtin_namings, parse_plan, render_example, Template};

#[test]
fn golden_examples_round_trip() {
    common::golden_round_trip().unwrap();
}

#[test]
fn golden_plan_blocks_are_nonempty() {
    assert_eq!(
        common::plan_block(common::STANDARD_GOLDEN).len(),
        prompt_example_plan().len()
    );
    assert_eq!(
        common::plan_block(common::MYSTERY_GOLDEN).len(),
        prompt_example_plan().len()
    );
}

#[test]
fn every_builtin_naming_parses_its_own_rendering() {
    let puzzle = Puzzle::prompt_example();
    let plan = prompt_example_plan();
    for naming in builtin_namings() {
        let text = render_example(&puzzle, &plan, &naming, Template::MYSTERY);
        assert_eq!(parse_plan(&text, &naming).unwrap(), plan, "naming {}", naming.id());
    }
}
