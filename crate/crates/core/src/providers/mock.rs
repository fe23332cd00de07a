//! Deterministic offline backends.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConnotationJudge, Decomposer, Embedder, EntailmentJudge, Verdict};
use crate::connotation::{Connotation, ConnotationLabel};
use crate::corpus::{Direction, Paragraph};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::matching::EntailmentQuery;

/// Lowercases, maps punctuation to spaces, and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Feature-hashed bag of words. Texts sharing tokens get similar vectors
/// regardless of language, which is enough to exercise alignment.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        HashEmbedder { dim, seed }
    }

    fn hash(&self, token: &str, salt: u64) -> u64 {
        crate::seed::derive(self.seed ^ salt.wrapping_mul(0x9E37_79B9), token)
    }

    pub fn embed_one(&self, text: &str) -> Embedding {
        let mut v = vec![0.0; self.dim];
        let norm = normalize_text(text);
        let mut tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            tokens.push("<empty>");
        }
        for t in tokens {
            for salt in 0..2u64 {
                let h = self.hash(t, salt);
                let idx = (h % self.dim as u64) as usize;
                let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
                v[idx] += sign;
            }
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        Embedding::new(v).expect("non-zero vector")
    }
}

impl Embedder for HashEmbedder {
    fn tag(&self) -> String {
        format!("mock-hash-{}-{}", self.dim, self.seed)
    }

    fn embed(&self, texts: &[String], _language: &str) -> Result<Vec<Embedding>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// One fact per non-blank sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDecomposer;

impl Decomposer for IdentityDecomposer {
    fn tag(&self) -> String {
        "mock-identity".into()
    }

    fn decompose(&self, paragraph: &Paragraph, _subject: &str, _language: &str) -> Result<Vec<String>> {
        Ok(paragraph
            .sentences
            .iter()
            .filter(|s| !s.trim().is_empty())
            .cloned()
            .collect())
    }
}

/// One planted entailment: in `direction`, target fact `premise` entails
/// source fact `hypothesis`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OracleEntry {
    pub direction: Direction,
    pub hypothesis: usize,
    pub premise: usize,
}

/// Entailment judge backed by a table of known entailments, falling back
/// to normalized-string containment when the table has nothing for the
/// hypothesis.
#[derive(Debug, Clone, Default)]
pub struct OracleJudge {
    table: BTreeMap<(Direction, usize), BTreeSet<usize>>,
}

impl OracleJudge {
    pub fn containment() -> Self {
        OracleJudge::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = OracleEntry>) -> Self {
        let mut table: BTreeMap<(Direction, usize), BTreeSet<usize>> = BTreeMap::new();
        for e in entries {
            table.entry((e.direction, e.hypothesis)).or_default().insert(e.premise);
        }
        OracleJudge { table }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<OracleEntry> = crate::io::read_jsonl(path)?;
        Ok(Self::from_entries(entries))
    }

    pub fn insert(&mut self, entry: OracleEntry) {
        self.table
            .entry((entry.direction, entry.hypothesis))
            .or_default()
            .insert(entry.premise);
    }
}

impl EntailmentJudge for OracleJudge {
    fn tag(&self) -> String {
        "mock-oracle".into()
    }

    fn judge(&self, query: &EntailmentQuery) -> Result<Verdict> {
        let key = (query.direction.clone(), query.hypothesis_fact_id);
        let (supporting, rationale): (Vec<usize>, String) = match self.table.get(&key) {
            Some(premises) => (
                query
                    .premises
                    .iter()
                    .map(|p| p.target_fact_id)
                    .filter(|id| premises.contains(id))
                    .collect(),
                "oracle table".into(),
            ),
            None => {
                let hyp = normalize_text(query.hypothesis());
                let hits = query
                    .premises
                    .iter()
                    .filter(|p| !hyp.is_empty() && normalize_text(p.premise()).contains(&hyp))
                    .map(|p| p.target_fact_id)
                    .collect();
                (hits, "string containment".into())
            }
        };
        Ok(Verdict {
            entailed: !supporting.is_empty(),
            supporting,
            rationale: Some(rationale),
            backend_tag: self.tag(),
        })
    }
}

/// Cue lists for [`CueJudge`]; the JSON file format is the same shape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CueLists {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

/// Keyword connotation judge: a sentence with only positive cues is
/// positive, with only negative cues negative, otherwise neutral.
#[derive(Debug, Clone, Default)]
pub struct CueJudge {
    positive: Vec<String>,
    negative: Vec<String>,
}

impl CueJudge {
    pub fn new(cues: CueLists) -> Self {
        let prep = |v: Vec<String>| {
            v.iter()
                .map(|c| normalize_text(c))
                .filter(|c| !c.is_empty())
                .collect()
        };
        CueJudge {
            positive: prep(cues.positive),
            negative: prep(cues.negative),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(crate::io::read_json(path)?))
    }

    fn first_hit<'a>(cues: &'a [String], padded: &str) -> Option<&'a str> {
        cues.iter()
            .find(|c| padded.contains(&format!(" {c} ")))
            .map(String::as_str)
    }
}

impl ConnotationJudge for CueJudge {
    fn tag(&self) -> String {
        "mock-cues".into()
    }

    fn judge_connotation(&self, window: &[String], _subject: &str, _language: &str) -> Result<ConnotationLabel> {
        let last = window
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty connotation window".into()))?;
        let padded = format!(" {} ", normalize_text(last));
        let pos = Self::first_hit(&self.positive, &padded);
        let neg = Self::first_hit(&self.negative, &padded);
        let (value, rationale) = match (pos, neg) {
            (Some(c), None) => (Connotation::Positive, format!("positive cue {c:?}")),
            (None, Some(c)) => (Connotation::Negative, format!("negative cue {c:?}")),
            (Some(_), Some(_)) => (Connotation::Neutral, "conflicting cues".to_string()),
            (None, None) => (Connotation::Neutral, "no cue".to_string()),
        };
        Ok(ConnotationLabel {
            value,
            rationale: Some(rationale),
        })
    }
}
