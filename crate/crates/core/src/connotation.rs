//! Sentence-level connotation labels and their propagation to facts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::decompose::FactSentenceMap;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::providers::ConnotationJudge;

/// Sentences of context preceding the labeled sentence.
pub const CONTEXT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connotation {
    Positive,
    Neutral,
    Negative,
}

impl Connotation {
    pub const ALL: [Connotation; 3] = [Connotation::Positive, Connotation::Neutral, Connotation::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Connotation::Positive => "positive",
            Connotation::Neutral => "neutral",
            Connotation::Negative => "negative",
        }
    }
}

impl fmt::Display for Connotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Connotation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(Connotation::Positive),
            "neutral" | "neu" => Ok(Connotation::Neutral),
            "negative" | "neg" => Ok(Connotation::Negative),
            other => Err(Error::InvalidArgument(format!("unknown connotation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnotationLabel {
    pub value: Connotation,
    pub rationale: Option<String>,
}

/// One line of the connotation JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceLabel {
    pub paragraph_id: usize,
    pub sentence_index: usize,
    pub label: Connotation,
    pub rationale: Option<String>,
}

pub type SentenceLabels = BTreeMap<(usize, usize), ConnotationLabel>;
pub type FactLabels = BTreeMap<usize, ConnotationLabel>;

pub fn to_records(labels: &SentenceLabels) -> Vec<SentenceLabel> {
    labels
        .iter()
        .map(|(&(paragraph_id, sentence_index), l)| SentenceLabel {
            paragraph_id,
            sentence_index,
            label: l.value,
            rationale: l.rationale.clone(),
        })
        .collect()
}

pub fn from_records(records: Vec<SentenceLabel>) -> SentenceLabels {
    records
        .into_iter()
        .map(|r| {
            (
                (r.paragraph_id, r.sentence_index),
                ConnotationLabel {
                    value: r.label,
                    rationale: r.rationale,
                },
            )
        })
        .collect()
}

/// Labels every non-blank sentence in the context of up to two preceding
/// sentences of the same paragraph.
pub fn label_sentences(article: &Article, judge: &dyn ConnotationJudge, exec: Exec) -> Result<SentenceLabels> {
    let mut slots = Vec::new();
    for p in &article.paragraphs {
        for (i, s) in p.sentences.iter().enumerate() {
            if !s.trim().is_empty() {
                slots.push((p, i));
            }
        }
    }
    let labels = exec.try_map(&slots, |&(p, i)| {
        let start = i.saturating_sub(CONTEXT);
        let window: Vec<String> = p.sentences[start..=i].to_vec();
        judge
            .judge_connotation(&window, &article.subject_name, &article.language_code)
            .map(|l| ((p.id, i), l))
            .map_err(|e| e.context(format!("labeling paragraph {} sentence {}", p.id, i)))
    })?;
    Ok(labels.into_iter().collect())
}

/// Copies each fact's sentence label onto the fact.
pub fn propagate_labels(
    fact_ids: impl IntoIterator<Item = usize>,
    sentence_labels: &SentenceLabels,
    map: &FactSentenceMap,
) -> Result<FactLabels> {
    fact_ids
        .into_iter()
        .map(|id| {
            let key = map.get(id).ok_or(Error::MissingForFact {
                what: "sentence mapping",
                fact_id: id,
            })?;
            let label = sentence_labels.get(&key).ok_or(Error::MissingForFact {
                what: "sentence connotation",
                fact_id: id,
            })?;
            Ok((id, label.clone()))
        })
        .collect()
}

/// Proportions of (positive, neutral, negative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
}

pub fn connotation_distribution<'a>(labels: impl IntoIterator<Item = &'a Connotation>) -> Result<Distribution> {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[*l as usize] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidArgument("connotation distribution of zero facts".into()));
    }
    let f = |c: usize| c as f64 / n as f64;
    Ok(Distribution {
        positive: f(counts[0]),
        neutral: f(counts[1]),
        negative: f(counts[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Paragraph;
    use crate::providers::mock::{CueJudge, CueLists};
    use proptest::prelude::*;
    use std::sync::Mutex;

    struct Recorder(Mutex<Vec<usize>>);
    impl ConnotationJudge for Recorder {
        fn tag(&self) -> String {
            "rec".into()
        }
        fn judge_connotation(&self, w: &[String], _: &str, _: &str) -> Result<ConnotationLabel> {
            self.0.lock().unwrap().push(w.len());
            Ok(ConnotationLabel { value: Connotation::Neutral, rationale: None })
        }
    }

    fn article() -> Article {
        Article {
            language_code: "en".into(),
            title: "T".into(),
            subject_name: "S".into(),
            is_lgbt: None,
            nationality: None,
            paragraphs: vec![
                Paragraph { id: 0, sentences: vec!["She won an award.".into(), "a".into(), "b".into(), "c".into()] },
                Paragraph { id: 1, sentences: vec!["He was arrested.".into(), "".into()] },
            ],
        }
    }

    #[test]
    fn windows_truncate_at_paragraph_start() {
        let r = Recorder(Mutex::new(vec![]));
        let labels = label_sentences(&article(), &r, Exec::Sequential).unwrap();
        assert_eq!(*r.0.lock().unwrap(), vec![1, 2, 3, 3, 1]);
        assert_eq!(labels.len(), 5);
    }

    #[test]
    fn cue_labels_and_propagation() {
        let cues = CueJudge::new(CueLists { positive: vec!["award".into()], negative: vec!["arrested".into()] });
        let labels = label_sentences(&article(), &cues, Exec::Parallel).unwrap();
        assert_eq!(labels[&(0, 0)].value, Connotation::Positive);
        assert_eq!(labels[&(1, 0)].value, Connotation::Negative);
        let map = FactSentenceMap { entries: [(0, (0, 0)), (1, (0, 0)), (2, (1, 0))].into_iter().collect() };
        let facts = propagate_labels(0..3, &labels, &map).unwrap();
        assert_eq!(facts[&0].value, Connotation::Positive);
        assert_eq!(facts[&1].value, Connotation::Positive);
        assert_eq!(facts[&2].value, Connotation::Negative);
        let err = propagate_labels(0..4, &labels, &map).unwrap_err();
        assert!(err.to_string().contains("fact 3"), "{err}");
    }

    #[test]
    fn distribution_counts() {
        use Connotation::*;
        let d = connotation_distribution(&[Positive, Positive, Neutral, Negative]).unwrap();
        assert_eq!((d.positive, d.neutral, d.negative), (0.5, 0.25, 0.25));
        let d = connotation_distribution(&[Neutral, Neutral]).unwrap();
        assert_eq!((d.positive, d.neutral, d.negative), (0.0, 1.0, 0.0));
        assert!(connotation_distribution(&[]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let cues = CueJudge::new(CueLists { positive: vec!["award".into()], negative: vec![] });
        let labels = label_sentences(&article(), &cues, Exec::Sequential).unwrap();
        let text = crate::io::to_jsonl(&to_records(&labels));
        let back = from_records(crate::io::parse_jsonl(&text, "t").unwrap());
        assert_eq!(back, labels);
    }

    fn conn() -> impl Strategy<Value = Connotation> {
        prop_oneof![Just(Connotation::Positive), Just(Connotation::Neutral), Just(Connotation::Negative)]
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one_and_ignores_order(mut v in prop::collection::vec(conn(), 1..60)) {
            let d = connotation_distribution(&v).unwrap();
            prop_assert!((d.positive + d.neutral + d.negative - 1.0).abs() < 1e-9);
            v.reverse();
            prop_assert_eq!(connotation_distribution(&v).unwrap(), d);
        }
    }
}
