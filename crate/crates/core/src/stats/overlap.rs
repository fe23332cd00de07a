use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::median;
use crate::error::{Error, Result};
use crate::matching::GapLabel;

pub const HISTOGRAM_BINS: usize = 10;

/// Fraction of source facts entailed by the target article.
pub fn overlap_ratio(labels: &[GapLabel]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("overlap ratio of zero facts".into()));
    }
    let shared = labels.iter().filter(|l| l.entailed).count();
    Ok(shared as f64 / labels.len() as f64)
}

/// Metadata used to form subgroups.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BioMeta {
    pub bio_id: String,
    pub nationality: Option<String>,
    pub is_lgbt: Option<bool>,
}

impl BioMeta {
    /// Subgroup keys this bio belongs to.
    pub fn groups(&self) -> Vec<String> {
        let mut g = Vec::new();
        if let Some(n) = &self.nationality {
            g.push(format!("nationality={n}"));
        }
        if let Some(l) = self.is_lgbt {
            g.push(format!("is_lgbt={l}"));
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub bio_id: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgroupMedian {
    pub count: usize,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub ratios: Vec<PairRatio>,
    pub median: f64,
    pub histogram: Vec<HistogramBin>,
    pub subgroups: BTreeMap<String, SubgroupMedian>,
}

/// Equal-width bins over [0, 1]; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: i as f64 / bins as f64,
            hi: (i + 1) as f64 / bins as f64,
            count: 0,
        })
        .collect();
    for &v in values {
        let i = ((v * bins as f64).floor() as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

pub fn overlap_summary(ratios: &[f64], metadata: &[BioMeta]) -> Result<OverlapSummary> {
    if ratios.len() != metadata.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ratios but {} metadata records",
            ratios.len(),
            metadata.len()
        )));
    }
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("overlap ratio {r} outside [0, 1]")));
    }
    let median_all = median(ratios).ok_or_else(|| Error::InvalidArgument("no overlap ratios".into()))?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (r, m) in ratios.iter().zip(metadata) {
        for g in m.groups() {
            groups.entry(g).or_default().push(*r);
        }
    }
    Ok(OverlapSummary {
        ratios: ratios
            .iter()
            .zip(metadata)
            .map(|(r, m)| PairRatio {
                bio_id: m.bio_id.clone(),
                ratio: *r,
            })
            .collect(),
        median: median_all,
        histogram: histogram(ratios, HISTOGRAM_BINS),
        subgroups: groups
            .into_iter()
            .map(|(k, v)| {
                (
                    k,
                    SubgroupMedian {
                        count: v.len(),
                        median: median(&v).unwrap(),
                    },
                )
            })
            .collect(),
    })
}
