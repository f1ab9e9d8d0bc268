// SPDX-License-Identifier: MIT OR Apache-2.0

//! Extract, center and average concept representations over several
//! namings, then project them with PCA.

use std::collections::BTreeMap;

use fluidrep::backend::Backend;
use fluidrep::blocksworld::{bfs_solve, generate_puzzle};
use fluidrep::obfuscation::{builtin_naming, render_example, Template};
use fluidrep::replab::{center_table, cosine, cross_naming_table, extract, pca_project, ConceptTable, ExtractionSpec};
use fluidrep::toy::{ToyConfig, ToyModel};
use fluidrep::trace::ActivationDump;
use fluidrep::Concept;

const LAYER: usize = 2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ToyModel::new(ToyConfig {
        layers: 2,
        hidden_dim: 16,
        heads: 2,
        context_limit: 4096,
        seed: 5,
    })?;
    let puzzle = generate_puzzle(4, 3)?;
    let plan = bfs_solve(&puzzle)?;

    let mut centered: BTreeMap<u32, ConceptTable> = BTreeMap::new();
    for id in [1, 2, 4, 5] {
        let naming = builtin_naming(id)?;
        let ids = model.encode(&render_example(&puzzle, &plan, &naming, Template::MYSTERY));
        let pass = model.forward(&ids, None)?;
        let tokens = ids.iter().map(|&t| model.token_text(t)).collect();
        let dump: ActivationDump = pass.record.to_dump(model.name(), "block output", tokens, ids.clone())?;
        let spec = ExtractionSpec {
            naming: &naming,
            layer: LAYER,
            timestamp: ids.len(),
            window: ids.len(),
            batch: vec![&dump],
        };
        let mut raw = ConceptTable::new();
        for c in Concept::ALL {
            let rep = extract(&spec, c)?;
            raw.insert(c, rep.vector);
        }
        centered.insert(id, center_table(&raw)?);
    }
    let cross = cross_naming_table(&centered)?;

    println!("cosine of each naming's centered vector with the cross-naming one");
    for (id, table) in &centered {
        let sims: Vec<String> = Concept::ACTIONS
            .iter()
            .map(|c| format!("{}={:.3}", c.name(), cosine(&table[c], &cross[c]).unwrap_or(f64::NAN)))
            .collect();
        println!("  naming {id:>2}: {}", sims.join(" "));
    }

    let labels: Vec<String> = centered
        .iter()
        .flat_map(|(id, t)| {
            Concept::ACTIONS
                .iter()
                .filter(|c| t.contains_key(c))
                .map(move |c| format!("{}@{id}", c.name()))
        })
        .collect();
    let points: Vec<Vec<f64>> = centered
        .values()
        .flat_map(|t| Concept::ACTIONS.iter().filter_map(|c| t.get(c).cloned()))
        .collect();
    let pca = pca_project(&points, 2)?;
    println!("explained variance ratio: {:?}", pca.explained_ratio);
    for (label, xy) in labels.iter().zip(&pca.coords) {
        println!("  {label:<16} ({:+.3}, {:+.3})", xy[0], xy[1]);
    }
    Ok(())
}
