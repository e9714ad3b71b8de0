//! Laboratory for oblivious-transfer amplification.
//!
//! The crate is organized as a stack: `prob` supplies exact finite-distribution
//! arithmetic (statistical distance, prediction advantage), `hashing` adds
//! 2-universal Toeplitz hashing and min-entropy accounting, `engine` runs
//! two-party protocols deterministically, `primitives` defines the ideal and
//! weakened transfer functionalities with their samplers, `reductions`
//! implements the composition protocols, `analysis` measures security
//! parameters from exact joints or sample batches, and `planner` synthesizes
//! and validates amplification pipelines.

pub mod analysis;
pub mod engine;
pub mod hashing;
pub mod planner;
pub mod prob;
pub mod primitives;
pub mod reductions;
