// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::records::{
    dump_dir, generate_corpus, io_error, naming_dir, namings_under, open, parse_kind, read_answers, read_dumps,
    read_puzzles, read_reps_csv, table_of, trace_error, write_jsonl, write_reps_csv, AnswerRecord, PuzzleRecord,
    RepRow,
};
use super::runner::run_manifest;
use super::{
    sink, AnswerArgs, CliError, CurvesArgs, DumpSelection, ExperimentManifest, ExtractArgs, GenArgs, NamingArgs,
    Namings, PcaArgs, RenderArgs, RolloutArgs, RunArgs, StatsArgs,
};
use crate::backend::Backend;
use crate::blocksworld::{verify_plan, Verdict};
use crate::obfuscation::{parse_plan, render_prompt, ConceptClass, Naming};
use crate::presets;
use crate::replab::{
    center_table, convergence_curve, cross_naming_table, extract_class, pca_project, write_curve_csv, write_pca_csv,
    ConceptTable, ExtractionSpec, NamingBatch, RepError, RepKind,
};
use crate::stats::{read_accuracy_csv, steering_table, write_table_csv, StatsError};
use crate::steering::VectorKind;
use crate::toy::{ToyConfig, ToyModel};
use crate::trace::{write_dump, ActivationDump};

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn rep_error(e: RepError) -> CliError {
    match e {
        RepError::InvalidSpec(_) | RepError::InvalidK { .. } => CliError::Usage(e.to_string()),
        RepError::Trace(_) | RepError::Csv(_) => CliError::Format(e.to_string()),
        e => CliError::Failed(e.to_string()),
    }
}

fn namings_of(a: &NamingArgs) -> Result<Namings, CliError> {
    Ok(Namings { custom: a.custom()? })
}

pub(super) fn gen(a: &GenArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let corpus = generate_corpus(a.blocks, a.count, a.seed)?;
    write_jsonl(&corpus, sink(a.out.as_deref(), out_dir, "puzzles.jsonl")?)
}

#[derive(Serialize)]
struct PromptRecord {
    id: u32,
    naming: u32,
    prompt: String,
}

pub(super) fn render(a: &RenderArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let puzzles = read_puzzles(&a.puzzles)?;
    let id = a
        .naming
        .default_id()?
        .ok_or_else(|| CliError::Usage("--naming or --naming-file is required".into()))?;
    let naming = namings_of(&a.naming)?.get(id)?;
    let template = a.template.template();
    let prompts: Vec<PromptRecord> = puzzles
        .iter()
        .map(|p| PromptRecord {
            id: p.id,
            naming: id,
            prompt: render_prompt(&p.puzzle, &naming, template),
        })
        .collect();
    write_jsonl(&prompts, sink(a.out.as_deref(), out_dir, "prompts.jsonl")?)
}

/// The verdict for one answer line.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictLine {
    /// 1-based, counting non-blank lines.
    pub line: usize,
    pub id: Option<u32>,
    pub naming: Option<u32>,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn judge(
    line: usize,
    answer: &Result<AnswerRecord, String>,
    puzzles: &BTreeMap<u32, &PuzzleRecord>,
    namings: &Namings,
    default: Option<u32>,
) -> VerdictLine {
    let mut v = VerdictLine {
        line,
        id: None,
        naming: default,
        correct: false,
        verdict: None,
        error: None,
    };
    let rec = match answer {
        Ok(r) => r,
        Err(e) => {
            v.error = Some(format!("malformed line: {e}"));
            return v;
        }
    };
    v.id = Some(rec.id);
    v.naming = rec.naming.or(default);
    let Some(naming_id) = v.naming else {
        v.error = Some("no naming given".into());
        return v;
    };
    let naming = match namings.get(naming_id) {
        Ok(n) => n,
        Err(e) => {
            v.error = Some(e.to_string());
            return v;
        }
    };
    let Some(puzzle) = puzzles.get(&rec.id) else {
        v.error = Some(format!("unknown puzzle id {}", rec.id));
        return v;
    };
    match parse_plan(&rec.text, &naming) {
        Ok(plan) => {
            let verdict = verify_plan(&puzzle.puzzle, &plan);
            v.correct = verdict.is_valid();
            v.verdict = Some(verdict);
        }
        Err(e) => v.error = Some(format!("parse error: {e}")),
    }
    v
}

fn judge_all(a: &AnswerArgs) -> Result<(Vec<PuzzleRecord>, Vec<VerdictLine>), CliError> {
    let puzzles = read_puzzles(&a.puzzles)?;
    let answers = read_answers(&a.answers)?;
    let namings = namings_of(&a.naming)?;
    let default = a.naming.default_id()?;
    let by_id: BTreeMap<u32, &PuzzleRecord> = puzzles.iter().map(|p| (p.id, p)).collect();
    let verdicts = answers
        .iter()
        .enumerate()
        .map(|(i, ans)| judge(i + 1, ans, &by_id, &namings, default))
        .collect();
    Ok((puzzles, verdicts))
}

pub(super) fn verify(a: &AnswerArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let (_, verdicts) = judge_all(a)?;
    let correct = verdicts.iter().filter(|v| v.correct).count();
    write_jsonl(&verdicts, sink(a.out.as_deref(), out_dir, "verdicts.jsonl")?)?;
    eprintln!("{correct}/{} answers valid", verdicts.len());
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreRow {
    pub naming: u32,
    pub puzzles: usize,
    pub answered: usize,
    pub correct: usize,
    pub malformed: usize,
    pub accuracy: f64,
}

/// Per naming: the first answer to each puzzle counts, unanswered puzzles
/// count as wrong, and lines that fail to parse or verify are wrong.
pub fn score_rows(puzzles: &[PuzzleRecord], verdicts: &[VerdictLine], default: Option<u32>) -> Vec<ScoreRow> {
    let mut rows: BTreeMap<u32, ScoreRow> = BTreeMap::new();
    let mut seen: BTreeSet<(u32, u32)> = BTreeSet::new();
    let ids: BTreeSet<u32> = puzzles.iter().map(|p| p.id).collect();
    for n in default.into_iter().chain(verdicts.iter().filter_map(|v| v.naming)) {
        rows.entry(n).or_insert_with(|| ScoreRow {
            naming: n,
            puzzles: puzzles.len(),
            ..ScoreRow::default()
        });
    }
    for v in verdicts {
        let Some(row) = v.naming.and_then(|n| rows.get_mut(&n)) else {
            continue;
        };
        if v.error.is_some() && v.verdict.is_none() {
            row.malformed += 1;
        }
        match v.id {
            Some(id) if ids.contains(&id) && seen.insert((row.naming, id)) => {
                row.answered += 1;
                row.correct += usize::from(v.correct);
            }
            _ => {}
        }
    }
    rows.into_values()
        .map(|mut r| {
            r.accuracy = if r.puzzles == 0 {
                0.0
            } else {
                r.correct as f64 / r.puzzles as f64
            };
            r
        })
        .collect()
}

pub(super) fn score(a: &AnswerArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let (puzzles, verdicts) = judge_all(a)?;
    let rows = score_rows(&puzzles, &verdicts, a.naming.default_id()?);
    let unattributed = verdicts.iter().filter(|v| v.naming.is_none()).count();
    if unattributed > 0 {
        eprintln!("{unattributed} answer lines have no naming and were not scored");
    }
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref(), out_dir, "scores.csv")?);
    w.write_record(["naming", "puzzles", "answered", "correct", "malformed", "accuracy"])
        .map_err(failed)?;
    for r in &rows {
        w.write_record([
            r.naming.to_string(),
            r.puzzles.to_string(),
            r.answered.to_string(),
            r.correct.to_string(),
            r.malformed.to_string(),
            format!("{:.4}", r.accuracy),
        ])
        .map_err(failed)?;
    }
    w.flush().map_err(failed)
}

fn out_directory(out: Option<&Path>, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    out.or(out_dir)
        .map(Path::to_path_buf)
        .ok_or_else(|| CliError::Usage(format!("an output directory is required (--out or {})", super::OUT_ENV)))
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(failed)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub(super) fn rollout(a: &RolloutArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let out = out_directory(a.out.as_deref(), out_dir)?;
    let config: ToyConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ToyConfig::default(),
    };
    let model = ToyModel::new(config).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(l) = a.layers.iter().flatten().find(|&&l| l > model.num_layers()) {
        return Err(CliError::Usage(format!("layer {l} beyond {}", model.num_layers())));
    }
    let mut puzzles = read_puzzles(&a.puzzles)?;
    puzzles.truncate(a.limit.unwrap_or(usize::MAX));
    let resolver = Namings { custom: None };
    let namings: Vec<Naming> = a.namings.iter().map(|&n| resolver.get(n)).collect::<Result<_, _>>()?;
    let template = a.template.template();
    let jobs: Vec<(&Naming, &PuzzleRecord)> = namings
        .iter()
        .flat_map(|n| puzzles.iter().map(move |p| (n, p)))
        .collect();
    let answers: Vec<AnswerRecord> = thread_pool(a.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(naming, rec)| {
                let prompt = model.encode(&render_prompt(&rec.puzzle, naming, template));
                let g = model
                    .generate(&prompt, a.max_new, None)
                    .map_err(|e| CliError::Usage(format!("puzzle {}: {e}", rec.id)))?;
                let dir = dump_dir(&out, naming.id(), rec.id);
                let mut dump = model.dump(&g).map_err(|e| trace_error(&dir, e))?;
                if let Some(keep) = &a.layers {
                    dump.retain_layers(|l| keep.contains(&l));
                }
                write_dump(&dump, &dir).map_err(|e| trace_error(&dir, e))?;
                Ok(AnswerRecord {
                    id: rec.id,
                    naming: Some(naming.id()),
                    text: model.decode(&g.tokens[g.prompt_len..]),
                })
            })
            .collect::<Result<_, CliError>>()
    })?;
    let path = out.join("answers.jsonl");
    let file = std::fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    write_jsonl(&answers, std::io::BufWriter::new(file))
}

struct Selected {
    namings: Vec<Naming>,
    /// Namings entering cross-naming averages.
    pool: Vec<u32>,
    dumps: BTreeMap<u32, Vec<ActivationDump>>,
}

fn select_dumps(s: &DumpSelection, layer: usize, batch: Option<usize>) -> Result<Selected, CliError> {
    let ids = match &s.namings {
        Some(ids) => ids.clone(),
        None => namings_under(&s.dumps)?
            .into_iter()
            .filter(|n| !s.exclude.contains(n))
            .collect(),
    };
    if ids.is_empty() {
        return Err(CliError::Missing(format!(
            "no naming-NN directories under {}",
            s.dumps.display()
        )));
    }
    let resolver = Namings { custom: None };
    let mut namings = Vec::new();
    let mut dumps = BTreeMap::new();
    for id in ids {
        namings.push(resolver.get(id)?);
        let dir = naming_dir(&s.dumps, id);
        dumps.insert(id, read_dumps(&dir, Some(&[layer]), batch.or(s.batch))?);
    }
    let pool = namings
        .iter()
        .map(|n| n.id())
        .filter(|n| !s.exclude.contains(n))
        .collect();
    Ok(Selected { namings, pool, dumps })
}

/// Raw representations of `classes` for every selected naming. A class
/// missing a concept in some naming's window is left out for that naming,
/// with a warning; it is an error only if nothing at all is found.
fn raw_reps(
    sel: &Selected,
    layer: usize,
    timestamp: usize,
    window: usize,
    classes: &[ConceptClass],
) -> Result<BTreeMap<u32, Vec<crate::replab::ConceptRepresentation>>, CliError> {
    let mut out = BTreeMap::new();
    for naming in &sel.namings {
        let spec = ExtractionSpec {
            naming,
            layer,
            timestamp,
            window,
            batch: sel.dumps[&naming.id()].iter().collect(),
        };
        let mut reps = Vec::new();
        for &class in classes {
            match extract_class(&spec, class) {
                Ok(r) => reps.extend(r.into_values()),
                Err(e @ RepError::NoOccurrences(_)) => {
                    eprintln!("fluidrep: naming {}, T={timestamp}: {class} skipped: {e}", naming.id());
                }
                Err(e) => return Err(rep_error(e)),
            }
        }
        if !reps.is_empty() {
            out.insert(naming.id(), reps);
        }
    }
    if out.is_empty() {
        return Err(CliError::Failed(format!(
            "T={timestamp}, window {window}: no naming has a complete concept class"
        )));
    }
    Ok(out)
}

/// Cross-naming averages per class, each over the pooled namings holding
/// that whole class. Also returns which namings entered each class.
fn cross_of(
    centered: &BTreeMap<u32, ConceptTable>,
    pool: &[u32],
    classes: &[ConceptClass],
) -> Result<(ConceptTable, BTreeMap<ConceptClass, Vec<u32>>), CliError> {
    let mut table = ConceptTable::new();
    let mut used = BTreeMap::new();
    for &class in classes {
        let kept: BTreeMap<u32, ConceptTable> = pool
            .iter()
            .filter_map(|n| centered.get(n).map(|t| (*n, t)))
            .filter(|(_, t)| class.members().iter().all(|c| t.contains_key(c)))
            .map(|(n, t)| (n, class.members().iter().map(|c| (*c, t[c].clone())).collect()))
            .collect();
        if kept.is_empty() {
            eprintln!("fluidrep: no cross-naming {class} representations: no pooled naming has the whole class");
            continue;
        }
        table.extend(cross_naming_table(&kept).map_err(rep_error)?);
        used.insert(class, kept.into_keys().collect());
    }
    if table.is_empty() {
        return Err(CliError::Usage(
            "no cross-naming representations: every naming is excluded or incomplete".into(),
        ));
    }
    Ok((table, used))
}

pub(super) fn extract(a: &ExtractArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let preset = presets::extraction_preset(&a.preset)
        .ok_or_else(|| CliError::Usage(format!("unknown preset {:?}; use narrow or wide", a.preset)))?;
    let layer = a.layer.unwrap_or(preset.layer);
    let window = a.window.unwrap_or(preset.window);
    let timestamps = a.timestamp.clone().unwrap_or_else(|| preset.timestamps.to_vec());
    let kind = match &a.kind {
        None => None,
        Some(k) => Some(parse_kind(k).ok_or_else(|| CliError::Usage(format!("unknown kind {k:?}")))?),
    };
    let sel = select_dumps(&a.select, layer, Some(a.select.batch.unwrap_or(preset.batch_size)))?;
    let classes = [ConceptClass::Actions, ConceptClass::Predicates];
    let mut rows = Vec::new();
    for &t in &timestamps {
        let raw = raw_reps(&sel, layer, t, window, &classes)?;
        let mut centered = BTreeMap::new();
        for (&n, reps) in &raw {
            let table: ConceptTable = reps.iter().map(|r| (r.concept, r.vector.clone())).collect();
            let c = center_table(&table).map_err(rep_error)?;
            for r in reps {
                rows.push(RepRow::from_rep(r, Some(n), layer, t, window));
                let mut cr = RepRow::from_rep(r, Some(n), layer, t, window);
                cr.kind = RepKind::Centered;
                cr.vector = c[&r.concept].clone();
                rows.push(cr);
            }
            centered.insert(n, c);
        }
        if !sel.pool.is_empty() {
            let (cross, used) = cross_of(&centered, &sel.pool, &classes)?;
            for (concept, v) in cross {
                let num_sequences = used[&concept.class()]
                    .iter()
                    .flat_map(|n| &raw[n])
                    .filter(|r| r.concept == concept)
                    .map(|r| r.num_sequences)
                    .sum();
                rows.push(RepRow {
                    concept,
                    kind: RepKind::CrossNaming,
                    naming: None,
                    layer,
                    timestamp: t,
                    window,
                    num_sequences,
                    vector: v,
                });
            }
        }
    }
    rows.retain(|r| kind.is_none_or(|k| r.kind == k));
    write_reps_csv(&rows, sink(a.out.as_deref(), out_dir, "representations.csv")?)
}

pub(super) fn curves(a: &CurvesArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let sel = select_dumps(&a.select, a.layer, None)?;
    let reference = match (&a.reference, a.reference_at) {
        (Some(path), at) => {
            let rows = read_reps_csv(open(path)?)?;
            let picked: Vec<&RepRow> = rows
                .iter()
                .filter(|r| {
                    r.kind == RepKind::CrossNaming
                        && r.layer == a.layer
                        && r.concept.class() == a.class
                        && at.is_none_or(|t| r.timestamp == t)
                })
                .collect();
            table_of(picked)?
        }
        (None, Some(t)) => {
            let raw = raw_reps(&sel, a.layer, t, a.window, &[a.class])?;
            let mut centered = BTreeMap::new();
            for (n, reps) in raw {
                let table: ConceptTable = reps.into_iter().map(|r| (r.concept, r.vector)).collect();
                centered.insert(n, center_table(&table).map_err(rep_error)?);
            }
            cross_of(&centered, &sel.pool, &[a.class])?.0
        }
        (None, None) => return Err(CliError::Usage("give --reference or --reference-at".into())),
    };
    let batches: Vec<NamingBatch<'_>> = sel
        .namings
        .iter()
        .map(|n| NamingBatch {
            naming: n,
            dumps: sel.dumps[&n.id()].iter().collect(),
        })
        .collect();
    let points = convergence_curve(&batches, a.layer, a.window, a.class, &reference, a.stride).map_err(rep_error)?;
    write_curve_csv(&points, sink(a.out.as_deref(), out_dir, "curves.csv")?).map_err(rep_error)
}

pub(super) fn pca(a: &PcaArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let kind = match &a.kind {
        None => None,
        Some(k) => Some(parse_kind(k).ok_or_else(|| CliError::Usage(format!("unknown kind {k:?}")))?),
    };
    let rows = read_reps_csv(open(&a.reps)?)?;
    let picked: Vec<&RepRow> = rows
        .iter()
        .filter(|r| {
            kind.is_none_or(|k| r.kind == k)
                && a.layer.is_none_or(|l| r.layer == l)
                && a.timestamp.is_none_or(|t| r.timestamp == t)
                && a.class.is_none_or(|c| r.concept.class() == c)
        })
        .collect();
    if picked.is_empty() {
        return Err(CliError::Usage("no representation rows match the selection".into()));
    }
    let labels: Vec<String> = picked
        .iter()
        .map(|r| match r.naming {
            Some(n) => format!("{}@{n}", r.concept),
            None => r.concept.to_string(),
        })
        .collect();
    let points: Vec<Vec<f64>> = picked.iter().map(|r| r.vector.clone()).collect();
    let fit = pca_project(&points, a.k).map_err(rep_error)?;
    let ratios: Vec<String> = fit.explained_ratio.iter().map(|r| format!("{r:.4}")).collect();
    eprintln!("explained variance ratio: {}", ratios.join(" "));
    write_pca_csv(&labels, &fit, sink(a.out.as_deref(), out_dir, "pca.csv")?).map_err(rep_error)
}

pub(super) fn run(a: &RunArgs, out_dir: Option<&Path>, patch: bool) -> Result<(), CliError> {
    let manifest: ExperimentManifest = read_json(&a.manifest)?;
    let wrong = manifest
        .variants
        .iter()
        .find(|v| (v.kind == VectorKind::Symbolic) != patch);
    if let Some(v) = wrong {
        let cmd = if patch { "patch" } else { "steer" };
        return Err(CliError::Usage(format!(
            "variant {:?} of kind {:?} does not belong to `{cmd}`",
            v.name, v.kind
        )));
    }
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let out = match (&a.out, &manifest.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => out_directory(None, out_dir)?,
    };
    std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let workers = a
        .workers
        .or(manifest.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    let summary = run_manifest(&manifest, base, &out, workers)?;
    for (name, naming, e) in &summary.vector_errors {
        eprintln!("{name}, naming {naming}: {e}");
    }
    for (name, e) in &summary.stats_skipped {
        eprintln!("{name}: no test ({e})");
    }
    for (condition, per) in &summary.accuracy {
        let mean = per.values().sum::<f64>() / per.len().max(1) as f64;
        eprintln!("{condition}: mean accuracy {mean:.4}");
    }
    let errors = summary.cells.iter().filter(|c| c.error.is_some()).count();
    if errors > 0 && errors == summary.cells.len() {
        return Err(CliError::Failed(format!("all {errors} cells failed")));
    }
    Ok(())
}

fn stats_error(e: StatsError) -> CliError {
    match e {
        StatsError::UnknownCondition(_) => CliError::Usage(e.to_string()),
        StatsError::Csv(_) => CliError::Format(e.to_string()),
        e => CliError::Failed(e.to_string()),
    }
}

pub(super) fn stats(a: &StatsArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let (mut table, is_delta) = read_accuracy_csv(open(&a.input)?).map_err(stats_error)?;
    for per in table.values_mut() {
        per.retain(|n, _| !a.exclude.contains(n));
    }
    let baseline = match (&a.baseline, is_delta) {
        (Some(_), true) => return Err(CliError::Usage("delta input takes no --baseline".into())),
        (Some(b), false) => Some(b.as_str()),
        (None, false) => Some(super::runner::BASELINE),
        (None, true) => None,
    };
    let rows = steering_table(&table, baseline).map_err(stats_error)?;
    write_table_csv(&rows, sink(a.out.as_deref(), out_dir, "stats.csv")?).map_err(stats_error)
}

pub(super) fn presets() -> Result<(), CliError> {
    let all = serde_json::json!({
        "max_sequence_length": presets::MAX_SEQUENCE_LENGTH,
        "excluded_namings": presets::EXCLUDED_NAMINGS,
        "puzzles": { "blocks": presets::PUZZLE_BLOCKS, "count": presets::PUZZLE_COUNT },
        "extraction": [presets::EXTRACT_NARROW, presets::EXTRACT_WIDE],
        "steering": presets::STEERING,
        "patching": presets::PATCHING,
        "negative": presets::NEGATIVE,
    });
    println!("{}", serde_json::to_string_pretty(&all).map_err(failed)?);
    Ok(())
}
