// SPDX-License-Identifier: MIT OR Apache-2.0

//! # fluidrep
//!
//! Desk-scale tooling for studying how a reasoning model adapts its internal
//! representations of obfuscated planning concepts:
//!
//! - [`blocksworld`]: STRIPS BlocksWorld states, plan verification, puzzle
//!   generation, and an exhaustive BFS solver.
//! - [`obfuscation`]: the twenty built-in Mystery namings, prompt rendering,
//!   and plan parsing.
//! - [`trace`]: the `FRD1` activation-dump format and multi-token concept
//!   matching.
//! - [`replab`]: window-averaged concept extraction, centering, cross-naming
//!   averages, similarity curves, and PCA.
//! - [`steering`]: norm-preserving steering, symbolic patching, and negative
//!   steering through a backend-agnostic hook contract.
//! - [`toy`]: a seeded byte-level decoder-only transformer implementing that
//!   contract.
//! - [`stats`]: one-sample one-tailed t-tests over per-naming deltas.
//! - [`cli`]: the `fluidrep` command line and experiment runner.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod backend;
pub mod blocksworld;
pub mod cli;
pub mod obfuscation;
pub mod presets;
pub mod replab;
pub mod stats;
pub mod steering;
pub mod toy;
pub mod trace;

pub use backend::{Backend, BackendError, Generation, HiddenHook, Site};
pub use obfuscation::{Concept, ConceptClass, Naming};
