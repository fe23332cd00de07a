//! Cross-lingual fact alignment.
//!
//! Facts are retrieved only from target paragraphs adjacent to the source
//! fact's paragraph in a bipartite paragraph graph, and ranked by the
//! hubness-corrected distance `D(e, f) = d(e, f) - hubness(f)`, where `d`
//! is cosine distance and `hubness(f)` is the mean distance from `f` to its
//! `k_nn` nearest neighbours in a background sample drawn from target
//! paragraphs that are *not* adjacent to the source fact's paragraph.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::decompose::FactedArticle;
use crate::embedding::{check_dims, Embedding};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed;

/// Late-interaction score: for every vector in `query`, its best cosine
/// similarity against `doc`, summed. Not symmetric.
pub fn max_sim(query: &[&Embedding], doc: &[&Embedding]) -> Result<f64> {
    if query.is_empty() || doc.is_empty() {
        return Err(Error::InvalidArgument("max_sim needs two non-empty sets".into()));
    }
    let dim = check_dims(query.iter().copied(), None)?;
    check_dims(doc.iter().copied(), dim)?;
    Ok(query
        .iter()
        .map(|q| doc.iter().map(|d| q.cosine(d)).fold(f64::NEG_INFINITY, f64::max))
        .sum())
}

/// Index of the maximum; the lowest index wins ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Undirected bipartite graph between the fact-bearing paragraphs of the
/// source article (rows) and the target article (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphGraph {
    /// Paragraph ids of the rows, in document order.
    pub source_paragraphs: Vec<usize>,
    /// Paragraph ids of the columns, in document order.
    pub target_paragraphs: Vec<usize>,
    adjacency: Vec<Vec<bool>>,
}

impl ParagraphGraph {
    pub fn from_adjacency(
        source_paragraphs: Vec<usize>,
        target_paragraphs: Vec<usize>,
        adjacency: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if adjacency.len() != source_paragraphs.len()
            || adjacency.iter().any(|r| r.len() != target_paragraphs.len())
        {
            return Err(Error::InvalidArgument("adjacency shape mismatch".into()));
        }
        Ok(ParagraphGraph {
            source_paragraphs,
            target_paragraphs,
            adjacency,
        })
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn is_adjacent(&self, row: usize, col: usize) -> bool {
        self.adjacency[row][col]
    }

    pub fn row_of(&self, source_paragraph_id: usize) -> Option<usize> {
        self.source_paragraphs.iter().position(|&p| p == source_paragraph_id)
    }

    /// Target paragraph ids adjacent to a source paragraph.
    pub fn neighbours(&self, source_paragraph_id: usize) -> Vec<usize> {
        match self.row_of(source_paragraph_id) {
            Some(r) => self.target_paragraphs
                .iter()
                .zip(&self.adjacency[r])
                .filter(|(_, &a)| a)
                .map(|(&p, _)| p)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Every row and every column has at least one edge.
    pub fn is_connected_everywhere(&self) -> bool {
        self.adjacency.iter().all(|r| r.iter().any(|&a| a))
            && (0..self.target_paragraphs.len()).all(|c| self.adjacency.iter().any(|r| r[c]))
    }
}

fn paragraph_sets<'a>(fa: &'a FactedArticle, groups: &[(usize, Vec<usize>)]) -> Vec<Vec<&'a Embedding>> {
    groups
        .iter()
        .map(|(_, idx)| idx.iter().map(|&i| &fa.fact_embeddings[i]).collect())
        .collect()
}

/// Links each source paragraph to its best target paragraph by MaxSim and
/// vice versa, then forgets edge direction.
pub fn build_paragraph_graph(source: &FactedArticle, target: &FactedArticle) -> Result<ParagraphGraph> {
    let src = source.paragraph_groups();
    let tgt = target.paragraph_groups();
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::InvalidArgument("both articles need at least one fact".into()));
    }
    let dim = check_dims(&source.fact_embeddings, None)?;
    check_dims(&target.fact_embeddings, dim)?;

    let src_sets = paragraph_sets(source, &src);
    let tgt_sets = paragraph_sets(target, &tgt);

    let mut adjacency = vec![vec![false; tgt.len()]; src.len()];
    for (i, p) in src_sets.iter().enumerate() {
        let scores = tgt_sets.iter().map(|q| max_sim(p, q)).collect::<Result<Vec<_>>>()?;
        adjacency[i][argmax(&scores)] = true;
    }
    for (j, q) in tgt_sets.iter().enumerate() {
        let scores = src_sets.iter().map(|p| max_sim(q, p)).collect::<Result<Vec<_>>>()?;
        adjacency[argmax(&scores)][j] = true;
    }
    ParagraphGraph::from_adjacency(
        src.into_iter().map(|(p, _)| p).collect(),
        tgt.into_iter().map(|(p, _)| p).collect(),
        adjacency,
    )
}

/// Mean cosine distance from `point` to its `min(k_nn, |background|)`
/// nearest background vectors. An empty background yields 0.
pub fn hubness(point: &Embedding, background: &[&Embedding], k_nn: usize) -> f64 {
    if background.is_empty() || k_nn == 0 {
        return 0.0;
    }
    let mut dists: Vec<f64> = background.iter().map(|b| point.cosine_distance(b)).collect();
    dists.sort_by(f64::total_cmp);
    let k = k_nn.min(dists.len());
    dists[..k].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Candidates retrieved per source fact.
    pub k: usize,
    /// Neighbours averaged in the hubness estimate.
    pub k_nn: usize,
    /// Background sample size for the hubness estimate.
    pub background_sample: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            k: 2,
            k_nn: 5,
            background_sample: 50,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCandidate {
    #[serde(rename = "tgt_fact_id")]
    pub target_fact_id: usize,
    /// Raw cosine distance.
    pub d: f64,
    /// Hubness of the target fact.
    pub h: f64,
    /// Corrected distance `d - h`.
    #[serde(rename = "D")]
    pub corrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub src_fact_id: usize,
    pub candidates: Vec<AlignmentCandidate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSet {
    pub entries: Vec<AlignmentEntry>,
    pub config: AlignConfig,
}

impl AlignmentSet {
    pub fn get(&self, src_fact_id: usize) -> Option<&AlignmentEntry> {
        self.entries
            .binary_search_by_key(&src_fact_id, |e| e.src_fact_id)
            .ok()
            .map(|i| &self.entries[i])
    }
}

fn rank(a: &AlignmentCandidate, b: &AlignmentCandidate) -> Ordering {
    a.corrected
        .total_cmp(&b.corrected)
        .then(a.target_fact_id.cmp(&b.target_fact_id))
}

/// Retrieves up to `config.k` candidates for the source fact at position
/// `fact_index` of `source`.
pub fn align_fact(
    fact_index: usize,
    source: &FactedArticle,
    graph: &ParagraphGraph,
    target: &FactedArticle,
    config: &AlignConfig,
) -> Result<Vec<AlignmentCandidate>> {
    let fact = source
        .facts
        .get(fact_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no source fact at position {fact_index}")))?;
    let e = &source.fact_embeddings[fact_index];
    let adjacent = graph.neighbours(fact.paragraph_id);

    let (pool, rest): (Vec<usize>, Vec<usize>) =
        (0..target.facts.len()).partition(|&j| adjacent.contains(&target.facts[j].paragraph_id));
    if pool.is_empty() {
        return Err(Error::Internal(format!(
            "fact {} has an empty candidate pool (paragraph {} has no adjacent target paragraph)",
            fact.fact_id, fact.paragraph_id
        )));
    }

    let mut rng = seed::rng(seed::item(config.seed, fact.fact_id as u64));
    let amount = config.background_sample.min(rest.len());
    let background: Vec<&Embedding> = sample(&mut rng, rest.len(), amount)
        .into_iter()
        .map(|i| &target.fact_embeddings[rest[i]])
        .collect();
    if background.is_empty() {
        log::warn!(
            "fact {}: no non-adjacent target facts for the hubness background; using hubness 0",
            fact.fact_id
        );
    }

    let mut candidates: Vec<AlignmentCandidate> = pool
        .iter()
        .map(|&j| {
            let f = &target.fact_embeddings[j];
            if f.dim() != e.dim() {
                return Err(Error::DimensionMismatch {
                    expected: e.dim(),
                    actual: f.dim(),
                });
            }
            let d = e.cosine_distance(f);
            let h = hubness(f, &background, config.k_nn);
            Ok(AlignmentCandidate {
                target_fact_id: target.facts[j].fact_id,
                d,
                h,
                corrected: d - h,
            })
        })
        .collect::<Result<_>>()?;
    candidates.sort_by(rank);
    candidates.truncate(config.k.max(1));
    Ok(candidates)
}

/// Aligns every source fact. Facts are processed independently, each with
/// its own seeded background draw.
pub fn align_articles(
    source: &FactedArticle,
    graph: &ParagraphGraph,
    target: &FactedArticle,
    config: &AlignConfig,
) -> Result<AlignmentSet> {
    let indices: Vec<usize> = (0..source.facts.len()).collect();
    let entries = config.exec.try_map(&indices, |&i| {
        Ok(AlignmentEntry {
            src_fact_id: source.facts[i].fact_id,
            candidates: align_fact(i, source, graph, target, config)?,
        })
    })?;
    Ok(AlignmentSet {
        entries,
        config: *config,
    })
}

/// Facts grouped by paragraph: `(paragraph_id, fact positions)`.
pub(crate) fn group_by_paragraph(paragraph_ids: impl Iterator<Item = usize>) -> Vec<(usize, Vec<usize>)> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, p) in paragraph_ids.enumerate() {
        let g = groups.entry(p).or_default();
        if g.is_empty() {
            order.push(p);
        }
        g.push(i);
    }
    order.into_iter().map(|p| (p, groups.remove(&p).unwrap())).collect()
}
