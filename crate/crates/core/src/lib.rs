//! Fact-level information gaps between two language versions of an
//! article.
//!
//! Articles are decomposed into atomic facts, facts are aligned across
//! languages by embedding similarity with hubness correction, and an
//! entailment judge decides which source facts the target article conveys.
//! The [`stats`] and [`eval`] modules analyze the resulting labels.

pub mod align;
pub mod connotation;
pub mod corpus;
pub mod decompose;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod exec;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod providers;
pub mod report;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Exec;
