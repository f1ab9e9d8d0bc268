// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steer, patch and subtract concept vectors during toy-model decoding and
//! report which sites were touched.

use std::collections::{BTreeMap, BTreeSet};

use fluidrep::backend::Backend;
use fluidrep::blocksworld::generate_puzzle;
use fluidrep::obfuscation::{builtin_naming, render_prompt, Template};
use fluidrep::replab::{center_table, extract, ConceptTable, ExtractionSpec};
use fluidrep::steering::{apply_negative, apply_patching, apply_steering, Control, SteeringSpec, VectorKind};
use fluidrep::toy::{ToyConfig, ToyModel};
use fluidrep::Concept;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ToyModel::new(ToyConfig {
        layers: 3,
        hidden_dim: 16,
        heads: 2,
        context_limit: 4096,
        seed: 9,
    })?;
    let naming = builtin_naming(1)?;
    let prompt = model.encode(&render_prompt(&generate_puzzle(4, 1)?, &naming, Template::MYSTERY));

    // vectors from the prompt itself, at every layer
    let pass = model.forward(&prompt, None)?;
    let tokens = prompt.iter().map(|&t| model.token_text(t)).collect();
    let dump = pass
        .record
        .to_dump(model.name(), "block output", tokens, prompt.clone())?;
    let mut tables = BTreeMap::new();
    for layer in 1..=model.num_layers() {
        let spec = ExtractionSpec {
            naming: &naming,
            layer,
            timestamp: prompt.len(),
            window: prompt.len(),
            batch: vec![&dump],
        };
        let raw: ConceptTable = Concept::ALL
            .iter()
            .filter_map(|&c| extract(&spec, c).ok().map(|r| (c, r.vector)))
            .collect();
        tables.insert(layer, center_table(&raw)?);
    }

    let baseline = model.generate(&prompt, 24, None)?;
    println!("baseline    {} new tokens", baseline.tokens.len() - prompt.len());

    let window = prompt.len() / 2..prompt.len();
    for scale in [1.0, 2.0 / 3.0] {
        let spec = SteeringSpec {
            vector_kind: VectorKind::InNaming,
            scale,
            t_start: window.start,
            t_end: window.end,
            layers: BTreeSet::from([2]),
            vectors: tables[&2].clone(),
            seed: 0,
        };
        let run = apply_steering(&model, &prompt, 24, &spec, &naming)?;
        let same = run.generation.tokens == baseline.tokens;
        println!(
            "steer {scale:.2}  {} sites, same as baseline: {same}",
            run.report.touches.len()
        );
    }
    let run = apply_patching(
        &model,
        &prompt,
        24,
        window.clone(),
        1..=2,
        &tables,
        &Control::Matched,
        &naming,
    )?;
    let same = run.generation.tokens == baseline.tokens;
    println!(
        "patch       {} sites, same as baseline: {same}",
        run.report.touches.len()
    );
    let shuffled = Control::Shuffled { seed: 4 };
    let run = apply_negative(&model, &prompt, 24, window, 2..=3, &tables, &shuffled, &naming)?;
    let same = run.generation.tokens == baseline.tokens;
    println!(
        "subtract    {} sites (shuffled), same as baseline: {same}",
        run.report.touches.len()
    );
    Ok(())
}
