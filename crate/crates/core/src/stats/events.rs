//! Whole-paragraph gaps ("events") and the bound on their being classifier
//! artifacts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::connotation::{Connotation, FactLabels};
use crate::decompose::FactedArticle;
use crate::error::{Error, Result};
use crate::matching::GapLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub epsilon: f64,
    pub k: u64,
    pub bound: f64,
}

/// Upper bound `exp(-2 (1 - epsilon)^2 k)` on the probability that all `k`
/// not-entailed predictions are wrong, given error rate `epsilon`.
pub fn hoeffding_error_bound(epsilon: f64, k: u64) -> Result<ErrorBound> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let t = 1.0 - epsilon;
    Ok(ErrorBound {
        epsilon,
        k,
        bound: (-2.0 * t * t * k as f64).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGap {
    pub paragraph_id: usize,
    #[serde(rename = "N_V")]
    pub n_v: u64,
    pub positive_count: u64,
    pub fact_ids: Vec<usize>,
    pub error_bound: ErrorBound,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    /// Fully missing paragraphs with at least one positive fact.
    pub gaps: Vec<EventGap>,
    /// Every fully missing paragraph, regardless of connotation.
    pub unfiltered: Vec<EventGap>,
}

pub fn find_missing_events(
    source: &FactedArticle,
    gaps: &[GapLabel],
    connotations: &FactLabels,
    epsilon: f64,
) -> Result<EventReport> {
    let by_fact: BTreeMap<usize, &GapLabel> = gaps.iter().map(|g| (g.fact_id, g)).collect();
    let mut out = EventReport::default();
    for (paragraph_id, positions) in source.paragraph_groups() {
        let mut all_missing = true;
        let mut positive = 0;
        let mut ids = Vec::with_capacity(positions.len());
        for i in positions {
            let id = source.facts[i].fact_id;
            let g = by_fact.get(&id).ok_or(Error::MissingForFact { what: "gap label", fact_id: id })?;
            let c = connotations.get(&id).ok_or(Error::MissingForFact {
                what: "connotation label",
                fact_id: id,
            })?;
            all_missing &= !g.entailed;
            positive += (c.value == Connotation::Positive) as u64;
            ids.push(id);
        }
        if !all_missing {
            continue;
        }
        let n_v = ids.len() as u64;
        let gap = EventGap {
            paragraph_id,
            n_v,
            positive_count: positive,
            fact_ids: ids,
            error_bound: hoeffding_error_bound(epsilon, n_v)?,
        };
        if positive > 0 {
            out.gaps.push(gap.clone());
        }
        out.unfiltered.push(gap);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::tests::faced;
    use crate::connotation::ConnotationLabel;
    use crate::embedding::Embedding;
    use proptest::prelude::*;

    #[test]
    fn bound_values() {
        assert_eq!(hoeffding_error_bound(1.0, 7).unwrap().bound, 1.0);
        assert!((hoeffding_error_bound(0.0, 3).unwrap().bound - 2.478752176666e-3).abs() < 1e-14);
        assert!((hoeffding_error_bound(0.1, 5).unwrap().bound - 3.035391380788e-4).abs() < 1e-15);
        assert!(hoeffding_error_bound(1.1, 1).is_err());
        assert!(hoeffding_error_bound(0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn bound_monotone(eps in 0.0f64..1.0, k in 1u64..200) {
            let b = hoeffding_error_bound(eps, k).unwrap().bound;
            prop_assert!(b > 0.0 && b <= 1.0);
            prop_assert!(hoeffding_error_bound(eps, k + 1).unwrap().bound <= b);
            prop_assert!(hoeffding_error_bound((eps + 0.01).min(1.0), k).unwrap().bound >= b);
        }
    }

    fn e(x: f64) -> Embedding {
        Embedding::new(vec![1.0, x]).unwrap()
    }

    fn label(fact_id: usize, entailed: bool) -> GapLabel {
        GapLabel {
            fact_id,
            entailed,
            supporting: vec![],
            direction: "en->fr".parse().unwrap(),
            rationale: None,
            backend: "t".into(),
        }
    }

    fn conns(values: &[Connotation]) -> FactLabels {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (i, ConnotationLabel { value: *v, rationale: None }))
            .collect()
    }

    #[test]
    fn events_filtered_by_positive_fact() {
        use Connotation::*;
        // Paragraph 0: facts 0-1; paragraph 1: facts 2-5; paragraph 2: facts 6-7.
        let src = faced("en", &[vec![e(0.0), e(0.1)], vec![e(0.2), e(0.3), e(0.4), e(0.5)], vec![e(0.6), e(0.7)]]);
        let gaps: Vec<GapLabel> = (0..8).map(|i| label(i, i < 2)).collect();
        let c = conns(&[Positive, Neutral, Neutral, Positive, Neutral, Negative, Neutral, Neutral]);
        let r = find_missing_events(&src, &gaps, &c, 0.2).unwrap();
        assert_eq!(r.gaps.len(), 1);
        let g = &r.gaps[0];
        assert_eq!((g.paragraph_id, g.n_v, g.positive_count), (1, 4, 1));
        assert_eq!(g.error_bound.bound, (-2.0f64 * 0.8 * 0.8 * 4.0).exp());
        assert_eq!(r.unfiltered.len(), 2);
        assert_eq!(r.unfiltered[1].paragraph_id, 2);

        let all: Vec<GapLabel> = (0..8).map(|i| label(i, true)).collect();
        assert!(find_missing_events(&src, &all, &c, 0.2).unwrap().unfiltered.is_empty());
        assert!(find_missing_events(&src, &gaps[..7], &c, 0.2).is_err());
    }
}
