// SPDX-License-Identifier: MIT OR Apache-2.0

//! Roll out the toy model, store the trace as an activation dump, read it
//! back and locate concept words in it.

use fluidrep::backend::Backend;
use fluidrep::blocksworld::generate_puzzle;
use fluidrep::obfuscation::{builtin_naming, render_prompt, Concept, Template};
use fluidrep::toy::{ToyConfig, ToyModel};
use fluidrep::trace::{match_concept, read_dump, write_dump};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ToyModel::new(ToyConfig {
        layers: 2,
        hidden_dim: 16,
        heads: 2,
        context_limit: 4096,
        seed: 0,
    })?;
    let naming = builtin_naming(1)?;
    let prompt = render_prompt(&generate_puzzle(4, 0)?, &naming, Template::MYSTERY);
    let generation = model.generate(&model.encode(&prompt), 32, None)?;
    println!("generated: {:?}", generation.text);

    let tokens: Vec<String> = generation.tokens.iter().map(|&t| model.token_text(t)).collect();
    let dump = generation
        .record
        .to_dump(model.name(), "block output", tokens, generation.tokens.clone())?;
    let dir = std::env::temp_dir().join(format!("fluidrep-dump-{}", std::process::id()));
    write_dump(&dump, &dir)?;
    let back = read_dump(&dir)?;
    println!(
        "{} tokens, {} layers of width {} written to {}",
        back.num_tokens(),
        back.layers().count(),
        back.hidden_dim(),
        dir.display()
    );

    for c in [Concept::PickUp, Concept::Clear, Concept::On] {
        let word = naming.word(c);
        let hits = match_concept(&back, c, word, 0..back.num_tokens());
        let first = hits.first().map(|m| m.positions.clone());
        println!(
            "{:<8} {:<10} {} occurrences, first at {:?}",
            c.name(),
            word,
            hits.len(),
            first
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
