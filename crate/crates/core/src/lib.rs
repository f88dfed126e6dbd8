//! Continual relation learning with a knowledge-based curriculum and
//! Reptile-style meta replay.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense tensors, two-layer MLPs, losses, Adam, seeded RNG
//!   streams, gradient checking and checkpoints.
//! - [`datasets`]: instances, tasks, benchmarks, partitioning, memory buffer
//!   and the synthetic benchmark generator.
//! - [`kgembed`]: TransE pre-training and the conceptual-distribution
//!   relation embeddings.
//! - [`curriculum`]: relation/task similarity, task difficulty and curriculum
//!   construction from memory.
//! - [`learner`]: the relation extractor, the meta update, and the training
//!   strategies.
//! - [`eval`]: accuracy and forgetting metrics, error bounds, correlations and
//!   the order-permutation studies.
//! - [`pipeline`]: experiment configuration, run directories, stages and
//!   report merging used by the `cml-lab` binary.

pub mod curriculum;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod kgembed;
pub mod learner;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
