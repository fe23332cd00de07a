//! Fact decomposition and fact-to-sentence forced alignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::{group_by_paragraph, hubness};
use crate::corpus::{validate_facts, Article, Fact};
use crate::embedding::{check_dims, Embedding};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::providers::Providers;
use crate::seed;

/// An article with its facts and one embedding per fact.
#[derive(Debug, Clone, PartialEq)]
pub struct FactedArticle {
    pub article: Article,
    pub facts: Vec<Fact>,
    pub fact_embeddings: Vec<Embedding>,
}

impl FactedArticle {
    pub fn new(article: Article, facts: Vec<Fact>, fact_embeddings: Vec<Embedding>) -> Result<Self> {
        if facts.len() != fact_embeddings.len() {
            return Err(Error::InvalidArgument(format!(
                "{} facts but {} embeddings",
                facts.len(),
                fact_embeddings.len()
            )));
        }
        validate_facts(&facts, &article)?;
        check_dims(&fact_embeddings, None)?;
        Ok(FactedArticle {
            article,
            facts,
            fact_embeddings,
        })
    }

    /// Embeds already-decomposed facts (e.g. read back from JSONL).
    pub fn embed(article: Article, facts: Vec<Fact>, providers: &Providers) -> Result<Self> {
        if facts.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "article {:?} has no facts",
                article.title
            )));
        }
        let texts: Vec<String> = facts.iter().map(|f| f.text.clone()).collect();
        let embeddings = providers.embed_facts(&texts, &article.language_code)?;
        Self::new(article, facts, embeddings)
    }

    /// `(paragraph_id, fact positions)` for every paragraph holding facts.
    pub fn paragraph_groups(&self) -> Vec<(usize, Vec<usize>)> {
        group_by_paragraph(self.facts.iter().map(|f| f.paragraph_id))
    }

    pub fn position_of(&self, fact_id: usize) -> Option<usize> {
        self.facts.binary_search_by_key(&fact_id, |f| f.fact_id).ok()
    }
}

/// Decomposes every paragraph, numbers the facts in document order, and
/// embeds them.
pub fn decompose_article(article: &Article, providers: &Providers, exec: Exec) -> Result<FactedArticle> {
    if article.paragraphs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "article {:?} has no paragraphs",
            article.title
        )));
    }
    let per_paragraph = exec.try_map(&article.paragraphs, |p| {
        let facts = providers
            .decomposer
            .decompose(p, &article.subject_name, &article.language_code)
            .map_err(|e| e.context(format!("decomposing paragraph {}", p.id)))?;
        if facts.is_empty() {
            return Err(Error::Backend {
                backend: providers.decomposer.tag(),
                message: "no facts returned".into(),
            }
            .context(format!("decomposing paragraph {}", p.id)));
        }
        Ok((p.id, facts))
    })?;
    let mut facts = Vec::new();
    for (paragraph_id, texts) in per_paragraph {
        for text in texts {
            facts.push(Fact {
                fact_id: facts.len(),
                paragraph_id,
                sentence_index: None,
                text: crate::corpus::nfc(&text),
            });
        }
    }
    FactedArticle::embed(article.clone(), facts, providers)
}

/// Fact id to `(paragraph_id, sentence_index)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactSentenceMap {
    pub entries: BTreeMap<usize, (usize, usize)>,
}

impl FactSentenceMap {
    pub fn get(&self, fact_id: usize) -> Option<(usize, usize)> {
        self.entries.get(&fact_id).copied()
    }

    /// Fills `sentence_index` on every mapped fact.
    pub fn apply(&self, facts: &mut [Fact]) {
        for f in facts {
            if let Some((_, s)) = self.get(f.fact_id) {
                f.sentence_index = Some(s);
            }
        }
    }

    /// Rebuilds a map from facts whose `sentence_index` is set.
    pub fn from_facts(facts: &[Fact]) -> Self {
        FactSentenceMap {
            entries: facts
                .iter()
                .filter_map(|f| f.sentence_index.map(|s| (f.fact_id, (f.paragraph_id, s))))
                .collect(),
        }
    }

    /// Within each paragraph, sentence indices never decrease with fact id.
    pub fn is_monotone(&self) -> bool {
        let mut last: BTreeMap<usize, usize> = BTreeMap::new();
        for (p, s) in self.entries.values() {
            if let Some(prev) = last.insert(*p, *s) {
                if prev > *s {
                    return false;
                }
            }
        }
        true
    }
}

/// Minimum-cost monotone assignment of rows (facts) to columns (sentences).
///
/// Every row is assigned exactly one column and assigned columns never
/// decrease. Steps: next fact on the same sentence, skip a sentence, or
/// advance both; each fact's cost counts once. Ties go to the lowest
/// column. Returns the assignment and its cost summed in row order.
pub fn monotone_alignment(costs: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = costs.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = costs[0].len();
    assert!(m > 0 && costs.iter().all(|r| r.len() == m), "ragged or empty cost matrix");

    // best[i][j]: min cost of rows 0..=i with row i on column j.
    // from[i][j]: column of row i-1 on that optimal path.
    let mut best = vec![vec![0.0; m]; n];
    let mut from = vec![vec![0usize; m]; n];
    best[0].copy_from_slice(&costs[0]);
    for i in 1..n {
        let mut arg = 0;
        for j in 0..m {
            if best[i - 1][j] < best[i - 1][arg] {
                arg = j;
            }
            best[i][j] = costs[i][j] + best[i - 1][arg];
            from[i][j] = arg;
        }
    }
    let mut j = 0;
    for c in 1..m {
        if best[n - 1][c] < best[n - 1][j] {
            j = c;
        }
    }
    let mut path = vec![0; n];
    for i in (0..n).rev() {
        path[i] = j;
        if i > 0 {
            j = from[i][j];
        }
    }
    let cost = path.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
    (path, cost)
}

/// Forced alignment of facts to sentences under the hubness-corrected
/// distance `d(fact, sentence) - hubness(sentence)`. Returns the sentence
/// position for each fact.
pub fn force_align_facts(
    facts: &[&Embedding],
    sentences: &[&Embedding],
    sentence_hubness: &[f64],
) -> Result<Vec<usize>> {
    if facts.is_empty() || sentences.is_empty() {
        return Err(Error::InvalidArgument("forced alignment needs facts and sentences".into()));
    }
    if sentence_hubness.len() != sentences.len() {
        return Err(Error::InvalidArgument("one hubness value per sentence required".into()));
    }
    let dim = check_dims(facts.iter().copied(), None)?;
    check_dims(sentences.iter().copied(), dim)?;
    let costs: Vec<Vec<f64>> = facts
        .iter()
        .map(|f| {
            sentences
                .iter()
                .zip(sentence_hubness)
                .map(|(s, h)| f.cosine_distance(s) - h)
                .collect()
        })
        .collect();
    Ok(monotone_alignment(&costs).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcedAlignConfig {
    pub k_nn: usize,
    pub background_sample: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ForcedAlignConfig {
    fn default() -> Self {
        ForcedAlignConfig {
            k_nn: 5,
            background_sample: 50,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// Embedded non-blank sentences of one paragraph: `(sentence_index, vector)`.
pub type ParagraphSentences = Vec<(usize, Embedding)>;

/// Embeds every non-blank sentence, grouped by paragraph in article order.
pub fn embed_sentences(article: &Article, providers: &Providers) -> Result<Vec<ParagraphSentences>> {
    let mut texts = Vec::new();
    let mut slots = Vec::new();
    for (pi, p) in article.paragraphs.iter().enumerate() {
        for (si, s) in p.sentences.iter().enumerate() {
            if !s.trim().is_empty() {
                texts.push(s.clone());
                slots.push((pi, si));
            }
        }
    }
    let vectors = providers.embed_facts(&texts, &article.language_code)?;
    let mut out = vec![Vec::new(); article.paragraphs.len()];
    for ((pi, si), v) in slots.into_iter().zip(vectors) {
        out[pi].push((si, v));
    }
    Ok(out)
}

/// Maps every fact to a sentence of its own paragraph. The hubness of each
/// sentence is estimated against a seeded sample of sentences from the
/// article's other paragraphs.
pub fn map_facts_to_sentences(
    faced: &FactedArticle,
    sentences: &[ParagraphSentences],
    config: &ForcedAlignConfig,
) -> Result<FactSentenceMap> {
    let article = &faced.article;
    if sentences.len() != article.paragraphs.len() {
        return Err(Error::InvalidArgument("sentence embeddings do not cover every paragraph".into()));
    }
    let groups = faced.paragraph_groups();
    let per_paragraph = config.exec.try_map(&groups, |(paragraph_id, positions)| {
        let pi = article
            .paragraph_index(*paragraph_id)
            .ok_or_else(|| Error::Internal(format!("unknown paragraph {paragraph_id}")))?;
        let own = &sentences[pi];
        if own.is_empty() {
            return Err(Error::Validation(format!("paragraph {paragraph_id} has no sentences")));
        }
        let others: Vec<&Embedding> = sentences
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pi)
            .flat_map(|(_, s)| s.iter().map(|(_, v)| v))
            .collect();
        let mut rng = seed::rng(seed::item(config.seed, *paragraph_id as u64));
        let amount = config.background_sample.min(others.len());
        let background: Vec<&Embedding> = rand::seq::index::sample(&mut rng, others.len(), amount)
            .into_iter()
            .map(|i| others[i])
            .collect();
        let sentence_vecs: Vec<&Embedding> = own.iter().map(|(_, v)| v).collect();
        let hub: Vec<f64> = sentence_vecs.iter().map(|s| hubness(s, &background, config.k_nn)).collect();
        let fact_vecs: Vec<&Embedding> = positions.iter().map(|&i| &faced.fact_embeddings[i]).collect();
        let path = force_align_facts(&fact_vecs, &sentence_vecs, &hub)
            .map_err(|e| e.context(format!("aligning paragraph {paragraph_id}")))?;
        Ok(positions
            .iter()
            .zip(path)
            .map(|(&i, s)| (faced.facts[i].fact_id, (*paragraph_id, own[s].0)))
            .collect::<Vec<_>>())
    })?;
    Ok(FactSentenceMap {
        entries: per_paragraph.into_iter().flatten().collect(),
    })
}
