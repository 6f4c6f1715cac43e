//! Exemplar retrieval and evaluation for in-context CAD code generation.
//!
//! The crate is organised around the lifecycle of one experiment:
//!
//! - [`corpus`]: ingest, deduplicate, complexity-score, tier and split exemplars.
//! - [`components`]: tokenize specifications into multi-granular n-gram sets.
//! - [`selection`]: the weighted tiling-ratio objective and its greedy maximizer.
//! - [`baselines`]: random, edit-distance, BM25 and clustering-based selectors.
//! - [`prompting`]: render the few-shot prompt and pull code out of responses.
//! - [`gateway`]: chat-completions client with record/replay cassettes.
//! - [`runner`]: JSON-lines bridge to the external CAD script runner.
//! - [`geometry`]: normalization, 96-candidate alignment, IoU / CD / ECD.
//! - [`harness`]: end-to-end runs, shot sweeps, correlation and failure reports.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod baselines;
pub mod components;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod geometry;
pub mod harness;
pub mod prompting;
pub mod runner;
pub mod selection;

pub use error::{Error, Result};
