// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named experiment defaults.

use std::ops::Range;

use serde::Serialize;

use crate::steering::{DEFAULT_PATCH_WINDOW, DEFAULT_SCALE, DEFAULT_STEER_WINDOW, PATCH_SCALES};

/// Generation budget, prompt included.
pub const MAX_SEQUENCE_LENGTH: usize = 24_576;
/// Namings left out of representation analyses.
pub const EXCLUDED_NAMINGS: [u32; 1] = [3];
pub const PUZZLE_COUNT: usize = 300;
pub const PUZZLE_BLOCKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionPreset {
    pub name: &'static str,
    pub window: usize,
    pub timestamps: &'static [usize],
    pub batch_size: usize,
    pub layer: usize,
}

/// Window 100.
pub const EXTRACT_NARROW: ExtractionPreset = ExtractionPreset {
    name: "narrow",
    window: 100,
    timestamps: &[2000, 4000, 7000, 10000],
    batch_size: 40,
    layer: 40,
};

/// Window 200.
pub const EXTRACT_WIDE: ExtractionPreset = ExtractionPreset {
    name: "wide",
    window: 200,
    ..EXTRACT_NARROW
};

pub fn extraction_preset(name: &str) -> Option<&'static ExtractionPreset> {
    [&EXTRACT_NARROW, &EXTRACT_WIDE].into_iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringPreset {
    pub scale: f64,
    pub window: Range<usize>,
    pub layers: &'static [usize],
    pub extraction_timestamp: usize,
    pub eval_puzzles: usize,
}

pub const STEERING: SteeringPreset = SteeringPreset {
    scale: DEFAULT_SCALE,
    window: DEFAULT_STEER_WINDOW,
    layers: &[1, 5, 10, 20, 30, 40, 50, 60],
    extraction_timestamp: 7000,
    eval_puzzles: 100,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchingPreset {
    pub window: Range<usize>,
    pub scales: [f64; 2],
}

pub const PATCHING: PatchingPreset = PatchingPreset {
    window: DEFAULT_PATCH_WINDOW,
    scales: PATCH_SCALES,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativePreset {
    pub window: Range<usize>,
    pub extraction_timestamp: usize,
    pub start_layer: usize,
    pub end_layers: [usize; 2],
}

pub const NEGATIVE: NegativePreset = NegativePreset {
    window: 2000..4000,
    extraction_timestamp: 4000,
    start_layer: 10,
    end_layers: [20, 30],
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(extraction_preset("narrow").unwrap().window, 100);
        let a = extraction_preset("wide").unwrap();
        assert_eq!((a.window, a.batch_size, a.layer), (200, 40, 40));
        assert!(extraction_preset("other").is_none());
    }
}
