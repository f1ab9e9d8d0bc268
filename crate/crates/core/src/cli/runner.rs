// SPDX-License-Identifier: MIT OR Apache-2.0

//! Manifest-driven experiments: baseline rollouts, extraction from their
//! dumps, then every (variant x naming x puzzle) intervention cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::{
    dump_dir, generate_corpus, io_error, read_puzzles, trace_error, write_reps_csv, PuzzleRecord, RepRow,
};
use super::CliError;
use crate::backend::Backend;
use crate::blocksworld::verify_plan;
use crate::obfuscation::{
    builtin_naming, parse_plan, render_prompt, Concept, ConceptClass, Naming, RelationalSlots, Template, TemplateKind,
};
use crate::presets::EXCLUDED_NAMINGS;
use crate::replab::{center_table, cross_naming_table, extract_class, ConceptTable, ExtractionSpec, RepKind};
use crate::stats::{one_sample_t, summarize, write_table_csv, TableRow};
use crate::steering::{make_vectors, run_intervention, Control, Intervention, LayerTables, VectorKind, VectorSources};
use crate::toy::{ToyConfig, ToyModel};
use crate::trace::{read_dump, write_dump, ActivationDump};

pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PuzzleSource {
    Generate { blocks: usize, count: u32, seed: u64 },
    File(PathBuf),
}

impl PuzzleSource {
    pub fn load(&self, base: &Path) -> Result<Vec<PuzzleRecord>, CliError> {
        match self {
            PuzzleSource::Generate { blocks, count, seed } => generate_corpus(*blocks, *count, *seed),
            PuzzleSource::File(p) => read_puzzles(&base.join(p)),
        }
    }
}

/// How a variant's vectors are reassigned before use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSpec {
    #[default]
    Matched,
    Shuffled {
        seed: u64,
    },
    Permuted(BTreeMap<Concept, Concept>),
}

impl ControlSpec {
    fn control(&self) -> Control {
        match self {
            ControlSpec::Matched => Control::Matched,
            ControlSpec::Shuffled { seed } => Control::Shuffled { seed: *seed },
            ControlSpec::Permuted(map) => Control::Permuted(map.clone()),
        }
    }
}

fn default_scale() -> f64 {
    crate::steering::DEFAULT_SCALE
}

/// One intervention condition. `scale` is the interpolation scale for
/// steering kinds and the displacement factor for `symbolic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub kind: VectorKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
    pub window: [usize; 2],
    pub layers: Vec<usize>,
    /// Extraction timestamp of the vectors.
    pub timestamp: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub control: ControlSpec,
}

impl Variant {
    pub fn intervention(&self) -> Intervention {
        match self.kind {
            VectorKind::Symbolic => Intervention::Patch,
            VectorKind::Negative => Intervention::Subtract,
            _ => Intervention::Steer { scale: self.scale },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSettings {
    pub window: usize,
    /// Dumps per naming used for extraction; all when absent.
    pub batch_size: Option<usize>,
    /// The first this-many puzzles provide vectors and the rest are
    /// evaluated. When absent the same puzzles serve both.
    pub extraction_puzzles: Option<usize>,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            window: 100,
            batch_size: None,
            extraction_puzzles: None,
        }
    }
}

fn default_template() -> TemplateKind {
    TemplateKind::Mystery
}

fn default_max_new() -> usize {
    256
}

fn default_exclude() -> Vec<u32> {
    EXCLUDED_NAMINGS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub puzzles: PuzzleSource,
    pub namings: Vec<u32>,
    #[serde(default = "default_template")]
    pub template: TemplateKind,
    #[serde(default)]
    pub relational: RelationalSlots,
    #[serde(default)]
    pub backend: ToyConfig,
    /// Tokens generated after the prompt.
    #[serde(default = "default_max_new")]
    pub max_new: usize,
    #[serde(default)]
    pub extraction: ExtractionSettings,
    /// Left out of cross-naming averages and of the statistics.
    #[serde(default = "default_exclude")]
    pub exclude: Vec<u32>,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn template(&self) -> Template {
        Template {
            kind: self.template,
            relational: self.relational,
        }
    }

    /// Checks naming ids and every variant against the backend.
    pub fn validate(&self, backend: &impl Backend) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.namings.is_empty() {
            return bad("no namings".into());
        }
        let mut seen = BTreeSet::new();
        for &n in &self.namings {
            builtin_naming(n).map_err(|e| CliError::Usage(e.to_string()))?;
            if !seen.insert(n) {
                return bad(format!("naming {n} listed twice"));
            }
        }
        if self.extraction.window == 0 {
            return bad("extraction window must be positive".into());
        }
        let mut names = BTreeSet::new();
        for v in &self.variants {
            let ok_name = !v.name.is_empty()
                && v.name != BASELINE
                && v.name.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
            if !ok_name {
                return bad(format!(
                    "variant name {:?} must be [A-Za-z0-9._-]+ and not {BASELINE:?}",
                    v.name
                ));
            }
            if !names.insert(&v.name) {
                return bad(format!("variant {:?} listed twice", v.name));
            }
            let [start, end] = v.window;
            if start >= end {
                return bad(format!("{}: empty window [{start}, {end})", v.name));
            }
            if end > backend.context_limit() {
                return bad(format!(
                    "{}: window end {end} beyond context {}",
                    v.name,
                    backend.context_limit()
                ));
            }
            if v.layers.is_empty() {
                return bad(format!("{}: no layers", v.name));
            }
            if let Some(l) = v.layers.iter().find(|&&l| l == 0 || l > backend.num_layers()) {
                return bad(format!("{}: layer {l} outside 1..={}", v.name, backend.num_layers()));
            }
            if v.timestamp < self.extraction.window {
                return bad(format!(
                    "{}: timestamp {} is shorter than the extraction window {}",
                    v.name, v.timestamp, self.extraction.window
                ));
            }
            let scale_ok = match v.kind {
                VectorKind::Symbolic | VectorKind::Negative => v.scale.is_finite(),
                _ => (0.0..=1.0).contains(&v.scale),
            };
            if !scale_ok {
                return bad(format!("{}: scale {} out of range", v.name, v.scale));
            }
        }
        Ok(())
    }

    /// Layers whose states the baseline dumps keep.
    pub fn dump_layers(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.variants.iter().flat_map(|v| v.layers.iter().copied()).collect();
        set.into_iter().collect()
    }
}

/// One line of the run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub condition: String,
    pub naming: u32,
    pub puzzle: u32,
    pub error: Option<String>,
    pub correct: bool,
    pub prompt_tokens: usize,
    pub total_tokens: usize,
    pub touches: usize,
    pub refused: usize,
    pub text_sha256: String,
}

impl Cell {
    fn failed(condition: &str, naming: u32, puzzle: u32, error: String) -> Self {
        Self {
            condition: condition.to_owned(),
            naming,
            puzzle,
            error: Some(error),
            correct: false,
            prompt_tokens: 0,
            total_tokens: 0,
            touches: 0,
            refused: 0,
            text_sha256: String::new(),
        }
    }

    fn file_name(&self) -> String {
        format!("naming-{:02}-puzzle-{:04}.json", self.naming, self.puzzle)
    }
}

/// What a run produced, also written under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub cells: Vec<Cell>,
    /// condition -> naming -> accuracy over the evaluated puzzles.
    pub accuracy: BTreeMap<String, BTreeMap<u32, f64>>,
    pub stats: Vec<TableRow>,
    /// Conditions without a test, with the reason.
    pub stats_skipped: Vec<(String, String)>,
    /// Variant/naming pairs whose vectors could not be built.
    pub vector_errors: Vec<(String, u32, String)>,
}

fn score(puzzle: &PuzzleRecord, naming: &Naming, text: &str) -> bool {
    parse_plan(text, naming).is_ok_and(|plan| verify_plan(&puzzle.puzzle, &plan).is_valid())
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write_cell(dir: &Path, cell: &Cell) -> Result<(), CliError> {
    let dir = dir.join(&cell.condition);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let path = dir.join(cell.file_name());
    let json = serde_json::to_string_pretty(cell).map_err(|e| CliError::Failed(e.to_string()))?;
    fs::write(&path, json).map_err(|e| io_error(&path, e))
}

fn read_cells(dir: &Path, condition: &str) -> Result<Vec<Cell>, CliError> {
    let dir = dir.join(condition);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| io_error(&dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", p.display())))
        })
        .collect()
}

struct Baseline {
    tokens: Vec<u32>,
    prompt_len: usize,
}

type Key = (usize, usize);

/// Raw tables per naming and (layer, timestamp).
type RawTables = BTreeMap<u32, BTreeMap<Key, ConceptTable>>;

fn extract_all(
    manifest: &ExperimentManifest,
    namings: &[Naming],
    dumps_root: &Path,
    extraction_ids: &[u32],
) -> Result<(RawTables, BTreeMap<u32, String>), CliError> {
    let keys: BTreeSet<Key> = manifest
        .variants
        .iter()
        .flat_map(|v| v.layers.iter().map(move |&l| (l, v.timestamp)))
        .collect();
    let mut tables = RawTables::new();
    let mut errors = BTreeMap::new();
    for naming in namings {
        let ids = &extraction_ids[..manifest
            .extraction
            .batch_size
            .unwrap_or(usize::MAX)
            .min(extraction_ids.len())];
        let mut dumps: Vec<ActivationDump> = Vec::new();
        for &id in ids {
            let dir = dump_dir(dumps_root, naming.id(), id);
            if dir.join("manifest.json").is_file() {
                dumps.push(read_dump(&dir).map_err(|e| trace_error(&dir, e))?);
            }
        }
        let per_key: Result<BTreeMap<Key, ConceptTable>, String> = keys
            .iter()
            .map(|&(layer, timestamp)| {
                let spec = ExtractionSpec {
                    naming,
                    layer,
                    timestamp,
                    window: manifest.extraction.window,
                    batch: dumps.iter().collect(),
                };
                let mut table = ConceptTable::new();
                for class in [ConceptClass::Actions, ConceptClass::Predicates] {
                    let reps = extract_class(&spec, class).map_err(|e| format!("layer {layer}, T={timestamp}: {e}"))?;
                    table.extend(reps.into_iter().map(|(c, r)| (c, r.vector)));
                }
                Ok(((layer, timestamp), table))
            })
            .collect();
        match per_key {
            Ok(t) => {
                tables.insert(naming.id(), t);
            }
            Err(e) => {
                errors.insert(naming.id(), e);
            }
        }
    }
    Ok((tables, errors))
}

/// Vectors of every (variant, naming), or why they are unavailable.
type VectorPlan = BTreeMap<(usize, u32), Result<LayerTables, String>>;

fn plan_vectors(
    manifest: &ExperimentManifest,
    raw: &RawTables,
    extract_errors: &BTreeMap<u32, String>,
    reps_out: &mut Vec<RepRow>,
) -> VectorPlan {
    let pool: Vec<u32> = manifest
        .namings
        .iter()
        .copied()
        .filter(|n| !manifest.exclude.contains(n) && raw.contains_key(n))
        .collect();
    let keys: BTreeSet<Key> = raw.values().flat_map(|t| t.keys().copied()).collect();
    let window = manifest.extraction.window;
    let mut centered: BTreeMap<(u32, Key), Result<ConceptTable, String>> = BTreeMap::new();
    for (&n, per_key) in raw {
        for (&key, table) in per_key {
            let c = center_table(table).map_err(|e| e.to_string());
            for (kind, t) in [(RepKind::Raw, Some(table)), (RepKind::Centered, c.as_ref().ok())] {
                for (concept, v) in t.into_iter().flatten() {
                    reps_out.push(rep_row(*concept, kind, Some(n), key, window, v));
                }
            }
            centered.insert((n, key), c);
        }
    }
    // cross-naming tables: centered ones for steering, raw ones for symbolic
    let mut cross: BTreeMap<Key, Result<(ConceptTable, ConceptTable), String>> = BTreeMap::new();
    for &key in &keys {
        let result = (|| {
            if pool.is_empty() {
                return Err("no namings left for cross-naming averages".to_owned());
            }
            let mut c = BTreeMap::new();
            let mut r = BTreeMap::new();
            for &n in &pool {
                c.insert(n, centered[&(n, key)].clone()?);
                r.insert(n, raw[&n][&key].clone());
            }
            let cc = cross_naming_table(&c).map_err(|e| e.to_string())?;
            let rr = cross_naming_table(&r).map_err(|e| e.to_string())?;
            Ok((cc, rr))
        })();
        if let Ok((cc, _)) = &result {
            for (concept, v) in cc {
                reps_out.push(rep_row(*concept, RepKind::CrossNaming, None, key, window, v));
            }
        }
        cross.insert(key, result);
    }

    let mut plan = VectorPlan::new();
    for (vi, variant) in manifest.variants.iter().enumerate() {
        for &n in &manifest.namings {
            let result = (|| {
                if let Some(e) = extract_errors.get(&n) {
                    return Err(format!("extraction failed: {e}"));
                }
                let mut tables = LayerTables::new();
                for &layer in &variant.layers {
                    let key = (layer, variant.timestamp);
                    let in_naming = centered[&(n, key)].clone()?;
                    let cross_table = match variant.kind {
                        VectorKind::CrossNaming => Some(cross[&key].clone()?.0),
                        VectorKind::Symbolic => Some(cross[&key].clone()?.1),
                        _ => None,
                    };
                    let sources = VectorSources {
                        in_naming: &in_naming,
                        cross_naming: cross_table.as_ref(),
                        seed: variant.seed,
                        symbolic_scale: variant.scale,
                    };
                    let t = make_vectors(variant.kind, &sources, &Concept::ALL).map_err(|e| e.to_string())?;
                    tables.insert(layer, t);
                }
                variant.control.control().tables(&tables).map_err(|e| e.to_string())
            })();
            plan.insert((vi, n), result);
        }
    }
    plan
}

fn rep_row(concept: Concept, kind: RepKind, naming: Option<u32>, key: Key, window: usize, v: &[f64]) -> RepRow {
    RepRow {
        concept,
        kind,
        naming,
        layer: key.0,
        timestamp: key.1,
        window,
        num_sequences: 0,
        vector: v.to_vec(),
    }
}

/// Runs every cell of `manifest` on the toy backend and writes
/// `ledger.csv`, `accuracy.csv`, `stats.csv` and `representations.csv`
/// under `out`, plus the baseline dumps and per-cell files they are merged
/// from.
pub fn run_manifest(
    manifest: &ExperimentManifest,
    base: &Path,
    out: &Path,
    workers: usize,
) -> Result<RunSummary, CliError> {
    let model = ToyModel::new(manifest.backend.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    manifest.validate(&model)?;
    let puzzles = manifest.puzzles.load(base)?;
    if puzzles.is_empty() {
        return Err(CliError::Usage("no puzzles".into()));
    }
    let namings: Vec<Naming> = manifest
        .namings
        .iter()
        .map(|&n| builtin_naming(n).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    let split = manifest.extraction.extraction_puzzles.unwrap_or(0).min(puzzles.len());
    let extraction_ids: Vec<u32> = if manifest.extraction.extraction_puzzles.is_some() {
        puzzles[..split].iter().map(|p| p.id).collect()
    } else {
        puzzles.iter().map(|p| p.id).collect()
    };
    let eval: &[PuzzleRecord] = if manifest.extraction.extraction_puzzles.is_some() {
        &puzzles[split..]
    } else {
        &puzzles
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let cells_dir = out.join("cells");
    let dumps_root = out.join("dumps");
    if cells_dir.exists() {
        fs::remove_dir_all(&cells_dir).map_err(|e| io_error(&cells_dir, e))?;
    }
    let keep = manifest.dump_layers();
    let template = manifest.template();

    let jobs: Vec<(&Naming, &PuzzleRecord)> = namings
        .iter()
        .flat_map(|n| puzzles.iter().map(move |p| (n, p)))
        .collect();
    let baselines: Vec<Result<Baseline, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(naming, rec)| {
                let prompt = model.encode(&render_prompt(&rec.puzzle, naming, template));
                let (cell, base) = match model.generate(&prompt, manifest.max_new, None) {
                    Ok(g) => {
                        let text = model.decode(&g.tokens[g.prompt_len..]);
                        let dir = dump_dir(&dumps_root, naming.id(), rec.id);
                        let mut dump = model.dump(&g).map_err(|e| trace_error(&dir, e))?;
                        dump.retain_layers(|l| keep.contains(&l));
                        write_dump(&dump, &dir).map_err(|e| trace_error(&dir, e))?;
                        let cell = Cell {
                            condition: BASELINE.into(),
                            naming: naming.id(),
                            puzzle: rec.id,
                            error: None,
                            correct: score(rec, naming, &text),
                            prompt_tokens: g.prompt_len,
                            total_tokens: g.tokens.len(),
                            touches: 0,
                            refused: 0,
                            text_sha256: sha256_hex(&text),
                        };
                        let base = Baseline {
                            tokens: g.tokens,
                            prompt_len: g.prompt_len,
                        };
                        (cell, Ok(base))
                    }
                    Err(e) => (
                        Cell::failed(BASELINE, naming.id(), rec.id, e.to_string()),
                        Err(CliError::Failed(e.to_string())),
                    ),
                };
                write_cell(&cells_dir, &cell)?;
                Ok(base)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let baselines: BTreeMap<(u32, u32), Result<Baseline, CliError>> =
        jobs.iter().map(|(n, p)| (n.id(), p.id)).zip(baselines).collect();

    let (raw, extract_errors) = extract_all(manifest, &namings, &dumps_root, &extraction_ids)?;
    let mut reps = Vec::new();
    let plan = plan_vectors(manifest, &raw, &extract_errors, &mut reps);
    let reps_path = out.join("representations.csv");
    let file = fs::File::create(&reps_path).map_err(|e| io_error(&reps_path, e))?;
    write_reps_csv(&reps, std::io::BufWriter::new(file))?;

    let steered: Vec<(usize, &Naming, &PuzzleRecord)> = (0..manifest.variants.len())
        .flat_map(|vi| namings.iter().flat_map(move |n| eval.iter().map(move |p| (vi, n, p))))
        .collect();
    pool.install(|| {
        steered
            .par_iter()
            .map(|&(vi, naming, rec)| {
                let variant = &manifest.variants[vi];
                let cell = steer_cell(
                    &model,
                    manifest,
                    variant,
                    &plan[&(vi, naming.id())],
                    &baselines,
                    naming,
                    rec,
                );
                write_cell(&cells_dir, &cell)
            })
            .collect::<Result<(), CliError>>()
    })?;

    merge(manifest, out, &cells_dir, eval, plan)
}

fn steer_cell(
    model: &ToyModel,
    manifest: &ExperimentManifest,
    variant: &Variant,
    tables: &Result<LayerTables, String>,
    baselines: &BTreeMap<(u32, u32), Result<Baseline, CliError>>,
    naming: &Naming,
    rec: &PuzzleRecord,
) -> Cell {
    let fail = |e: String| Cell::failed(&variant.name, naming.id(), rec.id, e);
    let tables = match tables {
        Ok(t) => t,
        Err(e) => return fail(format!("no vectors: {e}")),
    };
    let base = match &baselines[&(naming.id(), rec.id)] {
        Ok(b) => b,
        Err(e) => return fail(format!("no baseline: {e}")),
    };
    // replay the baseline rollout through the window, then continue
    let [start, end] = variant.window;
    let prefix = &base.tokens[..end.min(base.tokens.len()).max(base.prompt_len)];
    let budget = (base.prompt_len + manifest.max_new).saturating_sub(prefix.len());
    match run_intervention(
        model,
        prefix,
        budget,
        variant.intervention(),
        start..end,
        tables,
        naming,
    ) {
        Ok(run) => {
            let g = run.generation;
            let text = model.decode(&g.tokens[base.prompt_len..]);
            Cell {
                condition: variant.name.clone(),
                naming: naming.id(),
                puzzle: rec.id,
                error: None,
                correct: score(rec, naming, &text),
                prompt_tokens: base.prompt_len,
                total_tokens: g.tokens.len(),
                touches: run.report.touches.len(),
                refused: run.report.failures.len(),
                text_sha256: sha256_hex(&text),
            }
        }
        Err(e) => fail(e.to_string()),
    }
}

fn merge(
    manifest: &ExperimentManifest,
    out: &Path,
    cells_dir: &Path,
    eval: &[PuzzleRecord],
    plan: VectorPlan,
) -> Result<RunSummary, CliError> {
    let fail = |e: csv::Error| CliError::Failed(e.to_string());
    let conditions: Vec<&str> = std::iter::once(BASELINE)
        .chain(manifest.variants.iter().map(|v| v.name.as_str()))
        .collect();
    let mut cells = Vec::new();
    for c in &conditions {
        if manifest.variants.is_empty() && *c != BASELINE {
            continue;
        }
        cells.extend(read_cells(cells_dir, c)?);
    }
    let ledger_path = out.join("ledger.csv");
    let mut w = csv::Writer::from_path(&ledger_path).map_err(fail)?;
    w.write_record([
        "condition",
        "naming",
        "puzzle",
        "status",
        "correct",
        "prompt_tokens",
        "total_tokens",
        "touches",
        "refused",
        "text_sha256",
    ])
    .map_err(fail)?;
    for c in &cells {
        let status = c.error.as_deref().map_or("ok".to_owned(), |e| format!("error: {e}"));
        w.write_record([
            c.condition.clone(),
            c.naming.to_string(),
            c.puzzle.to_string(),
            status,
            u8::from(c.correct).to_string(),
            c.prompt_tokens.to_string(),
            c.total_tokens.to_string(),
            c.touches.to_string(),
            c.refused.to_string(),
            c.text_sha256.clone(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| io_error(&ledger_path, e))?;

    let eval_ids: BTreeSet<u32> = eval.iter().map(|p| p.id).collect();
    let mut accuracy: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for &c in &conditions {
        for &n in &manifest.namings {
            let correct = cells
                .iter()
                .filter(|x| x.condition == c && x.naming == n && eval_ids.contains(&x.puzzle) && x.correct)
                .count();
            accuracy
                .entry(c.to_owned())
                .or_default()
                .insert(n, correct as f64 / eval_ids.len() as f64);
        }
    }
    let acc_path = out.join("accuracy.csv");
    let mut w = csv::Writer::from_path(&acc_path).map_err(fail)?;
    w.write_record(["condition", "naming", "accuracy"]).map_err(fail)?;
    for &c in &conditions {
        for (n, a) in &accuracy[c] {
            w.write_record([c.to_owned(), n.to_string(), a.to_string()])
                .map_err(fail)?;
        }
    }
    w.flush().map_err(|e| io_error(&acc_path, e))?;

    let kept = |m: &BTreeMap<u32, f64>| -> BTreeMap<u32, f64> {
        m.iter()
            .filter(|(n, _)| !manifest.exclude.contains(n))
            .map(|(&n, &a)| (n, a))
            .collect()
    };
    let base = kept(&accuracy[BASELINE]);
    let mut stats = Vec::new();
    let mut stats_skipped = Vec::new();
    for v in &manifest.variants {
        let result = summarize(&base, &kept(&accuracy[&v.name])).and_then(|s| Ok((s.len(), one_sample_t(&s)?)));
        match result {
            Ok((n, result)) => stats.push(TableRow {
                condition: v.name.clone(),
                n,
                result,
            }),
            Err(e) => stats_skipped.push((v.name.clone(), e.to_string())),
        }
    }
    let stats_path = out.join("stats.csv");
    let file = fs::File::create(&stats_path).map_err(|e| io_error(&stats_path, e))?;
    write_table_csv(&stats, file).map_err(|e| CliError::Failed(e.to_string()))?;

    let vector_errors = plan
        .into_iter()
        .filter_map(|((vi, n), r)| r.err().map(|e| (manifest.variants[vi].name.clone(), n, e)))
        .collect();
    Ok(RunSummary {
        cells,
        accuracy,
        stats,
        stats_skipped,
        vector_errors,
    })
}
