// SPDX-License-Identifier: MIT OR Apache-2.0

//! A complete steering run from a JSON manifest: rollouts, extraction,
//! steered decoding and the accuracy ledger.

use fluidrep::cli::{run_manifest, ExperimentManifest};

const MANIFEST: &str = r#"{
  "puzzles": { "generate": { "blocks": 4, "count": 3, "seed": 0 } },
  "namings": [1, 2, 4],
  "backend": { "layers": 2, "hidden_dim": 16, "heads": 2, "context_limit": 4096, "seed": 0 },
  "max_new": 8,
  "extraction": { "window": 1000 },
  "variants": [
    { "name": "in-naming", "kind": "in-naming", "window": [1500, 2500], "layers": [1, 2], "timestamp": 2000 },
    { "name": "cross-naming", "kind": "cross-naming", "window": [1500, 2500], "layers": [1, 2], "timestamp": 2000 },
    { "name": "shuffled", "kind": "cross-naming", "window": [1500, 2500], "layers": [1, 2], "timestamp": 2000,
      "control": { "shuffled": { "seed": 1 } } }
  ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest: ExperimentManifest = serde_json::from_str(MANIFEST)?;
    let out = std::env::temp_dir().join(format!("fluidrep-run-{}", std::process::id()));
    let summary = run_manifest(&manifest, &out, &out, 1)?;
    println!("{} cells written under {}", summary.cells.len(), out.display());
    for (condition, per) in &summary.accuracy {
        println!("{condition:<14} {per:?}");
    }
    let touched: usize = summary.cells.iter().map(|c| c.touches).sum();
    println!("{touched} hidden states modified in total");
    for (condition, why) in &summary.stats_skipped {
        println!("no test for {condition}: {why}");
    }
    Ok(())
}
