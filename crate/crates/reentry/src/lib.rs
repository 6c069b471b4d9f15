//! File formats, parallel tuning and the command line for `reentry-core`.
//!
//! The core crate does the computation on in-memory data. This crate reads
//! and writes the exchange files (OMM/TIP/space-weather CSV, JSON tensors and
//! checkpoints, JSONL ledgers), drives ASHA with worker threads and exposes
//! everything through the `reentry` binary.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod tune;

pub use error::{Error, Result};
pub use reentry_core as core;
