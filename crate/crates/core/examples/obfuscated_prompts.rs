// SPDX-License-Identifier: MIT OR Apache-2.0

//! Render the same plan under the plain vocabulary and an obfuscated naming,
//! then parse the obfuscated text back.

use fluidrep::blocksworld::{bfs_solve, generate_puzzle};
use fluidrep::obfuscation::{builtin_naming, parse_plan, render_plan_line, Concept, Naming, Template};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let puzzle = generate_puzzle(4, 7)?;
    let plan = bfs_solve(&puzzle)?;
    let plain = Naming::identity();
    let mystery = builtin_naming(1)?;

    println!("concept      plain        naming 1");
    for c in Concept::ALL {
        println!("{:<12} {:<12} {}", c.name(), plain.word(c), mystery.word(c));
    }
    println!();
    for &a in plan.actions() {
        println!(
            "{:<40} | {}",
            render_plan_line(a, &plain, Template::STANDARD.kind),
            render_plan_line(a, &mystery, Template::MYSTERY.kind)
        );
    }

    let text = fluidrep::obfuscation::render_example(&puzzle, &plan, &mystery, Template::MYSTERY);
    let back = parse_plan(&text, &mystery)?;
    println!("\nparsed back identically: {}", back == plan);
    Ok(())
}
