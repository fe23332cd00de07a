//! Entailment-based matching of source facts against their aligned target
//! candidates, producing one information-gap label per source fact.

use serde::{Deserialize, Serialize};

use crate::align::AlignmentSet;
use crate::corpus::{ArticlePair, Direction};
use crate::decompose::FactedArticle;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::providers::EntailmentJudge;

/// Facts preceding and including a position; at most `WINDOW` long.
pub const WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseWindow {
    pub target_fact_id: usize,
    pub facts: Vec<String>,
}

impl PremiseWindow {
    /// The candidate fact itself (the last fact of the window).
    pub fn premise(&self) -> &str {
        self.facts.last().map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentQuery {
    pub hypothesis_fact_id: usize,
    pub hypothesis_window: Vec<String>,
    pub premises: Vec<PremiseWindow>,
    pub direction: Direction,
    pub subject_name: String,
}

impl EntailmentQuery {
    pub fn hypothesis(&self) -> &str {
        self.hypothesis_window.last().map(String::as_str).unwrap_or("")
    }
}

fn window(article: &FactedArticle, position: usize) -> Vec<String> {
    let start = (position + 1).saturating_sub(WINDOW);
    article.facts[start..=position].iter().map(|f| f.text.clone()).collect()
}

/// Builds the query for the source fact at `position`, with one premise
/// window per aligned candidate, in candidate rank order.
pub fn build_entailment_query(pair: &ArticlePair, alignment: &AlignmentSet, position: usize) -> Result<EntailmentQuery> {
    let fact = &pair.source.facts[position];
    let entry = alignment.get(fact.fact_id).ok_or(Error::MissingForFact {
        what: "alignment",
        fact_id: fact.fact_id,
    })?;
    let premises = entry
        .candidates
        .iter()
        .map(|c| {
            let j = pair.target.position_of(c.target_fact_id).ok_or_else(|| {
                Error::Internal(format!(
                    "alignment of fact {} names unknown target fact {}",
                    fact.fact_id, c.target_fact_id
                ))
            })?;
            Ok(PremiseWindow {
                target_fact_id: c.target_fact_id,
                facts: window(&pair.target, j),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntailmentQuery {
        hypothesis_fact_id: fact.fact_id,
        hypothesis_window: window(&pair.source, position),
        premises,
        direction: pair.direction(),
        subject_name: pair.source.article.subject_name.clone(),
    })
}

/// Information-gap label for one source fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapLabel {
    pub fact_id: usize,
    /// True when some aligned target fact entails this fact.
    pub entailed: bool,
    pub supporting: Vec<usize>,
    pub direction: Direction,
    pub rationale: Option<String>,
    pub backend: String,
}

pub fn match_fact(query: &EntailmentQuery, judge: &dyn EntailmentJudge) -> Result<GapLabel> {
    let verdict = judge
        .judge(query)
        .map_err(|e| e.context(format!("judging fact {}", query.hypothesis_fact_id)))?;
    let sent: Vec<usize> = query.premises.iter().map(|p| p.target_fact_id).collect();
    let mut supporting: Vec<usize> = verdict.supporting.into_iter().filter(|id| sent.contains(id)).collect();
    supporting.sort_unstable();
    supporting.dedup();
    if verdict.entailed && supporting.is_empty() {
        log::info!(
            "fact {}: entailed without named premises; attributing to all {} candidates",
            query.hypothesis_fact_id,
            sent.len()
        );
        supporting = sent;
        supporting.sort_unstable();
    } else if !verdict.entailed && !supporting.is_empty() {
        log::warn!(
            "fact {}: not entailed but premises {:?} named; keeping the label",
            query.hypothesis_fact_id,
            supporting
        );
        supporting.clear();
    }
    Ok(GapLabel {
        fact_id: query.hypothesis_fact_id,
        entailed: verdict.entailed,
        supporting,
        direction: query.direction.clone(),
        rationale: verdict.rationale,
        backend: verdict.backend_tag,
    })
}

/// Labels every source fact of `pair`. Output is ordered by fact id.
pub fn infogap(pair: &ArticlePair, alignment: &AlignmentSet, judge: &dyn EntailmentJudge, exec: Exec) -> Result<Vec<GapLabel>> {
    let positions: Vec<usize> = (0..pair.source.facts.len()).collect();
    let mut labels = exec.try_map(&positions, |&i| {
        let query = build_entailment_query(pair, alignment, i)?;
        match_fact(&query, judge)
    })?;
    labels.sort_by_key(|l| l.fact_id);
    Ok(labels)
}
