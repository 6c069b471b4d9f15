//! Allocation-only core of the re-entry prediction toolkit.
//!
//! Everything here is pure computation over in-memory data: TLE pruning,
//! decay-curve fitting and feature assembly, the GRU encoder/decoder with its
//! hand-written gradients, scheduled-sampling training, asynchronous
//! successive halving, evaluation metrics and a synthetic decay generator.
//! File formats, threading and the command line live in the `reentry` crate.
#![no_std]
// NaN must fail range checks, so `!(x > 0.0)` is intentional; index loops
// follow the matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod eval;
pub mod features;
pub mod hypersearch;
pub mod math;
pub mod nn;
pub mod pipeline;
pub mod synthetic;
pub mod time;
pub mod tle;
pub mod train;

pub use features::{DecayTrajectory, FeatureTensor, FitCoefficients, MinMax, SpaceWeatherSeries};
pub use nn::{ModelConfig, Seq2SeqModel};
pub use tle::{ObjectTrack, PruneConfig, SelectionCriteria, TleRecord};
