//! Downstream analyses over gap labels and fact connotations.

pub mod events;
pub mod imbalance;
pub mod overlap;
pub mod regression;

use serde::{Deserialize, Serialize};

use crate::connotation::{Connotation, FactLabels};
use crate::error::{Error, Result};
use crate::matching::GapLabel;

/// Median; even-length input takes the mean of the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Shared (entailed) and total fact counts in one connotation partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub shared: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub positive: Tally,
    pub neutral: Tally,
    pub negative: Tally,
}

impl PartitionCounts {
    pub fn get(&self, c: Connotation) -> Tally {
        match c {
            Connotation::Positive => self.positive,
            Connotation::Neutral => self.neutral,
            Connotation::Negative => self.negative,
        }
    }

    fn get_mut(&mut self, c: Connotation) -> &mut Tally {
        match c {
            Connotation::Positive => &mut self.positive,
            Connotation::Neutral => &mut self.neutral,
            Connotation::Negative => &mut self.negative,
        }
    }
}

/// Splits the gap labels of one article by fact connotation.
pub fn partition_counts(gaps: &[GapLabel], connotations: &FactLabels) -> Result<PartitionCounts> {
    let mut out = PartitionCounts::default();
    for g in gaps {
        let c = connotations.get(&g.fact_id).ok_or(Error::MissingForFact {
            what: "connotation label",
            fact_id: g.fact_id,
        })?;
        let t = out.get_mut(c.value);
        t.total += 1;
        t.shared += g.entailed as u64;
    }
    Ok(out)
}
