//! Fuzzer benchmarking: run or simulate repeated fuzzing trials, score them
//! with relative median coverage and bug metrics, compare fuzzers with
//! nonparametric statistics, and render a deterministic report.
//!
//! The pipeline is `model` → `runner` → `ingest` → `scoring`/`stats` →
//! `analysis` → `report`, with `cli` tying it together.

pub mod analysis;
pub mod cli;
pub mod ingest;
pub mod model;
pub mod report;
pub mod runner;
pub mod scoring;
pub mod stats;
