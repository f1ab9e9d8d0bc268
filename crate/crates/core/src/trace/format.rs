// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ActivationDump, DumpManifest, LayerMatrix, TraceError};

/// Leading bytes of every layer file, and the manifest's `format` value.
pub const MAGIC: &[u8; 4] = b"FRD1";

const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    format: String,
    #[serde(flatten)]
    manifest: DumpManifest,
    /// Stored layers and their file names, relative to the dump directory.
    layers: BTreeMap<usize, String>,
}

fn layer_file(layer: usize) -> String {
    format!("layer_{layer:03}.f32")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TraceError + '_ {
    move |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `dump` into directory `dir`, creating it if needed.
pub fn write_dump(dump: &ActivationDump, dir: impl AsRef<Path>) -> Result<(), TraceError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = BTreeMap::new();
    for (layer, m) in dump.layers() {
        let name = layer_file(layer);
        let mut bytes = Vec::with_capacity(4 + m.as_slice().len() * 4);
        bytes.extend_from_slice(MAGIC);
        for v in m.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        files.insert(layer, name);
    }
    let file = ManifestFile {
        format: String::from_utf8_lossy(MAGIC).into_owned(),
        manifest: dump.manifest().clone(),
        layers: files,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&file)?).map_err(io_err(&path))
}

pub fn read_dump(dir: impl AsRef<Path>) -> Result<ActivationDump, TraceError> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read(&path).map_err(io_err(&path))?;
    let file: ManifestFile = serde_json::from_slice(&text)?;
    if file.format.as_bytes() != MAGIC {
        return Err(TraceError::FormatVersionMismatch { found: file.format });
    }
    let d = file.manifest.hidden_dim;
    let rows = file.manifest.tokens.len();
    let mut layers = BTreeMap::new();
    for (layer, name) in file.layers {
        let path: PathBuf = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let (magic, payload) = bytes.split_at(bytes.len().min(4));
        if magic != MAGIC {
            return Err(TraceError::FormatVersionMismatch {
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let row_bytes = d * 4;
        if payload.len() % 4 != 0 || (row_bytes > 0 && payload.len() % row_bytes != 0) {
            return Err(TraceError::TruncatedFile {
                path: path.display().to_string(),
                len: bytes.len() as u64,
            });
        }
        let found_rows = payload.len().checked_div(row_bytes).unwrap_or(0);
        if found_rows != rows {
            return Err(TraceError::ShapeMismatch(format!(
                "{} holds {found_rows} rows, manifest lists {rows} tokens",
                path.display()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        layers.insert(layer, LayerMatrix::new(rows, d, data)?);
    }
    ActivationDump::new(file.manifest, layers)
}
