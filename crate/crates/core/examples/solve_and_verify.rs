// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generate a puzzle, solve it by breadth-first search and check plans.

use fluidrep::blocksworld::{bfs_solve, generate_puzzle, verify_plan, Plan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let puzzle = generate_puzzle(4, 42)?;
    println!("initial stacks: {:?}", puzzle.initial().stacks());
    println!("goal: {:?}", puzzle.goal().atoms());

    let plan = bfs_solve(&puzzle)?;
    println!("optimal plan ({} steps):", plan.len());
    for action in plan.actions() {
        println!("  {action}");
    }
    println!("verdict: {:?}", verify_plan(&puzzle, &plan).outcome);

    let truncated = Plan(plan.actions()[..plan.len().saturating_sub(1)].to_vec());
    println!("without the last step: {:?}", verify_plan(&puzzle, &truncated).outcome);
    Ok(())
}
