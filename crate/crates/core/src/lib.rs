//! Force polytopes and residual force polytopes for fixed-base serial manipulators,
//! robustness metrics extracted from them, and a direct-transcription trajectory
//! optimizer that uses those metrics as objectives.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod evaluation;
pub mod forcespace;
pub mod geometry;
pub mod model;
pub mod parallel;
pub mod transcription;
