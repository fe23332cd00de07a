//! Articles, paragraphs, facts, and article pairs.
//!
//! Articles arrive already split into sentences. All text is NFC-normalized
//! at ingest so that cache keys and alignments do not depend on the input
//! encoding.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::decompose::FactedArticle;
use crate::error::{from_json, Error, Result};
use crate::io;

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: usize,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    #[serde(rename = "language")]
    pub language_code: String,
    pub title: String,
    #[serde(rename = "subject")]
    pub subject_name: String,
    pub is_lgbt: Option<bool>,
    pub nationality: Option<String>,
    pub paragraphs: Vec<Paragraph>,
}

impl Article {
    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        let raw: Article = serde_json::from_str(text).map_err(|e| from_json(context, e))?;
        raw.normalized().validated(context)
    }

    fn normalized(mut self) -> Self {
        self.language_code = self.language_code.trim().to_string();
        self.title = nfc(&self.title);
        self.subject_name = nfc(&self.subject_name);
        self.nationality = self.nationality.as_deref().map(nfc);
        for p in &mut self.paragraphs {
            for s in &mut p.sentences {
                *s = nfc(s);
            }
        }
        self
    }

    /// Checks the article invariants; `context` names the source in errors.
    pub fn validated(self, context: &str) -> Result<Self> {
        if self.language_code.is_empty() {
            return Err(Error::Validation(format!("{context}: empty language code")));
        }
        if self.paragraphs.is_empty() {
            return Err(Error::Validation(format!("{context}: article has no paragraphs")));
        }
        let mut seen = HashSet::new();
        for p in &self.paragraphs {
            if !seen.insert(p.id) {
                return Err(Error::Schema {
                    context: context.to_string(),
                    message: format!("duplicate paragraph id {}", p.id),
                });
            }
        }
        if self.paragraphs.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::Validation(format!(
                "{context}: paragraph ids are not in increasing order"
            )));
        }
        for p in &self.paragraphs {
            if !p.sentences.iter().any(|s| !s.trim().is_empty()) {
                return Err(Error::Validation(format!(
                    "{context}: paragraph {} has no non-empty sentence",
                    p.id
                )));
            }
        }
        Ok(self)
    }

    pub fn paragraph(&self, id: usize) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.id == id)
    }

    /// Position of paragraph `id` in `paragraphs`.
    pub fn paragraph_index(&self, id: usize) -> Option<usize> {
        self.paragraphs.iter().position(|p| p.id == id)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("article serializes")
    }
}

pub fn load_article(path: &Path) -> Result<Article> {
    let text = io::read_to_string(path)?;
    Article::from_json_str(&text, &path.display().to_string())
}

pub fn save_article(article: &Article, path: &Path) -> Result<()> {
    io::write_atomic(path, article.to_json_string().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: usize,
    pub paragraph_id: usize,
    /// Index of the originating sentence within its paragraph, once known.
    pub sentence_index: Option<usize>,
    pub text: String,
}

/// Checks fact ordering and paragraph references against `article`.
pub fn validate_facts(facts: &[Fact], article: &Article) -> Result<()> {
    if facts.windows(2).any(|w| w[0].fact_id >= w[1].fact_id) {
        return Err(Error::Validation("fact ids are not strictly increasing".into()));
    }
    let mut last_para = 0;
    for f in facts {
        let idx = article.paragraph_index(f.paragraph_id).ok_or_else(|| {
            Error::Validation(format!(
                "fact {} refers to unknown paragraph {}",
                f.fact_id, f.paragraph_id
            ))
        })?;
        if idx < last_para {
            return Err(Error::Validation(format!(
                "fact {} is out of document order",
                f.fact_id
            )));
        }
        last_para = idx;
        if let Some(s) = f.sentence_index {
            let n = article.paragraphs[idx].sentences.len();
            if s >= n {
                return Err(Error::Validation(format!(
                    "fact {} sentence_index {s} out of range for paragraph {} ({n} sentences)",
                    f.fact_id, f.paragraph_id
                )));
            }
        }
    }
    Ok(())
}

pub fn read_facts(path: &Path) -> Result<Vec<Fact>> {
    let mut facts: Vec<Fact> = io::read_jsonl(path)?;
    for f in &mut facts {
        f.text = nfc(&f.text);
    }
    Ok(facts)
}

pub fn write_facts(path: &Path, facts: &[Fact]) -> Result<()> {
    io::write_jsonl(path, facts)
}

/// Source and target language of one gap-finding pass, e.g. `en->fr`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub source: String,
    pub target: String,
}

impl Direction {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Direction {
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        Direction::new(self.target.clone(), self.source.clone())
    }

    /// File-name friendly form, e.g. `en-fr`.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.source, self.target)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("->")
            .ok_or_else(|| Error::InvalidArgument(format!("direction {s:?} is not of the form src->tgt")))?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(format!("direction {s:?} has an empty side")));
        }
        Ok(Direction::new(a, b))
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Two decomposed articles oriented so that gap labels are computed for the
/// facts of `source`.
#[derive(Debug, Clone)]
pub struct ArticlePair {
    pub source: FactedArticle,
    pub target: FactedArticle,
}

impl ArticlePair {
    pub fn direction(&self) -> Direction {
        Direction::new(
            self.source.article.language_code.clone(),
            self.target.article.language_code.clone(),
        )
    }
}

pub fn pair_articles(a: FactedArticle, b: FactedArticle, direction: &Direction) -> Result<ArticlePair> {
    let (la, lb) = (&a.article.language_code, &b.article.language_code);
    if la == lb {
        return Err(Error::InvalidArgument(format!(
            "cannot pair two articles in the same language ({la})"
        )));
    }
    if direction.source == direction.target {
        return Err(Error::InvalidArgument(format!("direction {direction} is not cross-lingual")));
    }
    if a.facts.is_empty() || b.facts.is_empty() {
        return Err(Error::InvalidArgument("both articles need facts before pairing".into()));
    }
    if *la == direction.source && *lb == direction.target {
        Ok(ArticlePair { source: a, target: b })
    } else if *lb == direction.source && *la == direction.target {
        Ok(ArticlePair { source: b, target: a })
    } else {
        Err(Error::InvalidArgument(format!(
            "direction {direction} does not match article languages {la} and {lb}"
        )))
    }
}
