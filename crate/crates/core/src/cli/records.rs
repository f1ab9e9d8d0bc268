// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus records, the representation CSV and the dump directory layout.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::blocksworld::{generate_puzzle, Puzzle};
use crate::obfuscation::Concept;
use crate::replab::{ConceptRepresentation, ConceptTable, RepKind};
use crate::trace::{read_dump, ActivationDump, TraceError};

/// One line of a puzzle corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleRecord {
    pub id: u32,
    pub seed: u64,
    pub puzzle: Puzzle,
}

/// One line of an answers file. Without `naming`, the command's default
/// naming applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naming: Option<u32>,
    pub text: String,
}

/// Puzzle `i` of a generated corpus uses seed `seed * 1_000_003 + i`.
pub fn puzzle_seed(seed: u64, i: u32) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(u64::from(i))
}

pub fn generate_corpus(blocks: usize, count: u32, seed: u64) -> Result<Vec<PuzzleRecord>, CliError> {
    (0..count)
        .map(|id| {
            let s = puzzle_seed(seed, id);
            let puzzle = generate_puzzle(blocks, s).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(PuzzleRecord { id, seed: s, puzzle })
        })
        .collect()
}

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    let msg = format!("{}: {e}", path.display());
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::Missing(msg)
    } else {
        CliError::Failed(msg)
    }
}

pub fn trace_error(path: &Path, e: TraceError) -> CliError {
    match e {
        TraceError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            CliError::Missing(format!("{}: {source}", path.display()))
        }
        TraceError::Io { path: p, source } => CliError::Failed(format!("{p}: {source}")),
        e => CliError::Format(format!("{}: {e}", path.display())),
    }
}

/// Every record of a strict JSON-lines file. Blank lines are skipped.
pub fn read_puzzles(path: &Path) -> Result<Vec<PuzzleRecord>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec =
            serde_json::from_str(&line).map_err(|e| CliError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Answer lines in order; a line that does not parse is kept as its error.
pub fn read_answers(path: &Path) -> Result<Vec<Result<AnswerRecord, String>>, CliError> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| e.to_string()));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(items: &[T], mut w: impl Write) -> Result<(), CliError> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| CliError::Failed(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| CliError::Failed(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Failed(e.to_string()))
}

/// A row of the representation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub concept: Concept,
    pub kind: RepKind,
    /// Empty for cross-naming rows.
    pub naming: Option<u32>,
    pub layer: usize,
    pub timestamp: usize,
    pub window: usize,
    pub num_sequences: usize,
    pub vector: Vec<f64>,
}

impl RepRow {
    pub fn from_rep(
        rep: &ConceptRepresentation,
        naming: Option<u32>,
        layer: usize,
        timestamp: usize,
        window: usize,
    ) -> Self {
        Self {
            concept: rep.concept,
            kind: rep.kind,
            naming,
            layer,
            timestamp,
            window,
            num_sequences: rep.num_sequences,
            vector: rep.vector.clone(),
        }
    }
}

fn kind_name(kind: RepKind) -> &'static str {
    match kind {
        RepKind::Raw => "raw",
        RepKind::Centered => "centered",
        RepKind::CrossNaming => "cross-naming",
        RepKind::Symbolic => "symbolic",
    }
}

pub fn parse_kind(s: &str) -> Option<RepKind> {
    [RepKind::Raw, RepKind::Centered, RepKind::CrossNaming, RepKind::Symbolic]
        .into_iter()
        .find(|&k| kind_name(k) == s)
}

const REP_COLUMNS: [&str; 7] = [
    "concept",
    "kind",
    "naming",
    "layer",
    "timestamp",
    "window",
    "num_sequences",
];

/// Header `concept,kind,naming,layer,timestamp,window,num_sequences,v0,..`.
/// Values are written with Rust's shortest round-trip formatting.
pub fn write_reps_csv(rows: &[RepRow], writer: impl Write) -> Result<(), CliError> {
    let dim = rows.first().map_or(0, |r| r.vector.len());
    if rows.iter().any(|r| r.vector.len() != dim) {
        return Err(CliError::Failed("representations differ in dimension".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let header = REP_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("v{i}")));
    let fail = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        let fixed = [
            r.concept.name().to_owned(),
            kind_name(r.kind).to_owned(),
            r.naming.map(|n| n.to_string()).unwrap_or_default(),
            r.layer.to_string(),
            r.timestamp.to_string(),
            r.window.to_string(),
            r.num_sequences.to_string(),
        ];
        w.write_record(fixed.into_iter().chain(r.vector.iter().map(|v| v.to_string())))
            .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::Failed(e.to_string()))
}

pub fn read_reps_csv(reader: impl Read) -> Result<Vec<RepRow>, CliError> {
    let bad = |msg: String| CliError::Format(format!("representation csv: {msg}"));
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < REP_COLUMNS.len() || REP_COLUMNS.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num =
            |i: usize| -> Result<usize, CliError> { rec[i].parse().map_err(|e| bad(format!("{}: {e}", &rec[i]))) };
        let concept: Concept = rec[0]
            .parse()
            .map_err(|_| bad(format!("unknown concept {}", &rec[0])))?;
        let kind = parse_kind(&rec[1]).ok_or_else(|| bad(format!("unknown kind {}", &rec[1])))?;
        let naming = match &rec[2] {
            "" => None,
            s => Some(s.parse().map_err(|e| bad(format!("{s}: {e}")))?),
        };
        let vector = rec
            .iter()
            .skip(REP_COLUMNS.len())
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(RepRow {
            concept,
            kind,
            naming,
            layer: num(3)?,
            timestamp: num(4)?,
            window: num(5)?,
            num_sequences: num(6)?,
            vector,
        });
    }
    Ok(rows)
}

/// Concept -> vector for the rows that pass `filter`. Two rows for one
/// concept are an error.
pub fn table_of<'a>(rows: impl IntoIterator<Item = &'a RepRow>) -> Result<ConceptTable, CliError> {
    let mut table = ConceptTable::new();
    for r in rows {
        if table.insert(r.concept, r.vector.clone()).is_some() {
            return Err(CliError::Usage(format!(
                "several representations of {} match; narrow the selection",
                r.concept
            )));
        }
    }
    Ok(table)
}

/// `root/naming-NN`, the directory holding one naming's dumps.
pub fn naming_dir(root: &Path, naming: u32) -> PathBuf {
    root.join(format!("naming-{naming:02}"))
}

/// `root/naming-NN/puzzle-NNNN`.
pub fn dump_dir(root: &Path, naming: u32, puzzle: u32) -> PathBuf {
    naming_dir(root, naming).join(format!("puzzle-{puzzle:04}"))
}

/// Naming ids with a directory under `root`, ascending.
pub fn namings_under(root: &Path) -> Result<Vec<u32>, CliError> {
    let mut ids: Vec<u32> = std::fs::read_dir(root)
        .map_err(|e| io_error(root, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_prefix("naming-")?.parse().ok())
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Every dump under `dir`, in directory-name order, keeping only `layers`
/// when given. At most `limit` dumps are read.
pub fn read_dumps(dir: &Path, layers: Option<&[usize]>, limit: Option<usize>) -> Result<Vec<ActivationDump>, CliError> {
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Missing(format!("no dumps under {}", dir.display())));
    }
    subdirs.truncate(limit.unwrap_or(usize::MAX));
    subdirs
        .iter()
        .map(|p| {
            let mut d = read_dump(p).map_err(|e| trace_error(p, e))?;
            if let Some(keep) = layers {
                d.retain_layers(|l| keep.contains(&l));
            }
            Ok(d)
        })
        .collect()
}
