//! Pluggable backends for embedding, fact decomposition, entailment judging,
//! and connotation judging.
//!
//! Live backends talk to HTTP endpoints through [`http`] and persist every
//! response in a content-addressed [`cache::ResponseCache`]; the [`mock`]
//! backends are pure functions of their input and a seed.

pub mod cache;
pub mod http;
pub mod mock;
pub mod prompt;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::connotation::ConnotationLabel;
use crate::corpus::Paragraph;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::matching::EntailmentQuery;

pub trait Embedder: Send + Sync {
    fn tag(&self) -> String;
    /// One vector per text, in input order.
    fn embed(&self, texts: &[String], language: &str) -> Result<Vec<Embedding>>;
}

pub trait Decomposer: Send + Sync {
    fn tag(&self) -> String;
    fn decompose(&self, paragraph: &Paragraph, subject_name: &str, language: &str) -> Result<Vec<String>>;
}

pub trait EntailmentJudge: Send + Sync {
    fn tag(&self) -> String;
    fn judge(&self, query: &EntailmentQuery) -> Result<Verdict>;
}

pub trait ConnotationJudge: Send + Sync {
    fn tag(&self) -> String;
    /// Labels the last sentence of `window`; earlier sentences are context.
    fn judge_connotation(&self, window: &[String], subject_name: &str, language: &str) -> Result<ConnotationLabel>;
}

/// Outcome of one entailment judgement over all premise windows of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub entailed: bool,
    /// Target fact ids the backend named as entailing the hypothesis.
    pub supporting: Vec<usize>,
    pub rationale: Option<String>,
    pub backend_tag: String,
}

/// The four backends a pipeline run needs.
#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<dyn Embedder>,
    pub decomposer: Arc<dyn Decomposer>,
    pub judge: Arc<dyn EntailmentJudge>,
    pub connotation: Arc<dyn ConnotationJudge>,
    run_dim: Arc<OnceLock<usize>>,
}

impl Providers {
    pub fn new(
        embedder: Arc<dyn Embedder>,
        decomposer: Arc<dyn Decomposer>,
        judge: Arc<dyn EntailmentJudge>,
        connotation: Arc<dyn ConnotationJudge>,
    ) -> Self {
        Providers {
            embedder,
            decomposer,
            judge,
            connotation,
            run_dim: Arc::new(OnceLock::new()),
        }
    }

    /// Embeds `texts`, checking the count and that the dimension stays fixed
    /// for the lifetime of this `Providers`.
    pub fn embed_facts(&self, texts: &[String], language: &str) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("nothing to embed".into()));
        }
        let vectors = self.embedder.embed(texts, language)?;
        if vectors.len() != texts.len() {
            return Err(Error::Backend {
                backend: self.embedder.tag(),
                message: format!("returned {} vectors for {} texts", vectors.len(), texts.len()),
            });
        }
        let expected = *self.run_dim.get_or_init(|| vectors[0].dim());
        crate::embedding::check_dims(&vectors, Some(expected))?;
        Ok(vectors)
    }
}
