//! Recommender-system reinforcement-learning testbed: a MovieLens-driven user
//! simulator exposed as an episodic environment, three trainable agents, and
//! an experiment harness.

// `!(x >= lo)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod environment;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod replay;
pub mod simulator;
pub mod synthetic;
