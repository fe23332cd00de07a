//! Scoring gap labels against human annotations: F1, Cohen's kappa, and a
//! paired bootstrap test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::connotation::Connotation;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matching::GapLabel;
use crate::seed;

/// Annotator's answer for one fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotationOption {
    /// Inferable from the retrieved target facts.
    #[serde(rename = "1")]
    Retrieved,
    /// Inferable from the target article, but not from what was retrieved.
    #[serde(rename = "2")]
    NotRetrieved,
    /// Not inferable from the target article.
    #[serde(rename = "3")]
    Absent,
    #[serde(rename = "1p")]
    PartlyRetrieved,
    #[serde(rename = "2p")]
    PartlyNotRetrieved,
}

impl AnnotationOption {
    /// Collapsed gold label: anything but `3` counts as entailed.
    pub fn entailed(self) -> bool {
        self != AnnotationOption::Absent
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationOption::Retrieved => "1",
            AnnotationOption::NotRetrieved => "2",
            AnnotationOption::Absent => "3",
            AnnotationOption::PartlyRetrieved => "1p",
            AnnotationOption::PartlyNotRetrieved => "2p",
        }
    }
}

impl fmt::Display for AnnotationOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnnotationOption {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(AnnotationOption::Retrieved),
            "2" => Ok(AnnotationOption::NotRetrieved),
            "3" => Ok(AnnotationOption::Absent),
            "1p" => Ok(AnnotationOption::PartlyRetrieved),
            "2p" => Ok(AnnotationOption::PartlyNotRetrieved),
            other => Err(format!("unknown annotation option {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub fact_id: usize,
    pub option: AnnotationOption,
    pub annotator_id: String,
}

impl AnnotationRecord {
    pub fn collapsed(&self) -> bool {
        self.option.entailed()
    }
}

/// Parses `fact_id<TAB>option<TAB>annotator_id` rows. A header row and
/// blank lines are skipped.
pub fn parse_annotations(text: &str, context: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (n == 0 && line.starts_with("fact_id")) {
            continue;
        }
        let bad = |message: String| Error::Parse {
            context: format!("{context}:{}", n + 1),
            message,
        };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        out.push(AnnotationRecord {
            fact_id: cols[0].parse().map_err(|e| bad(format!("fact_id: {e}")))?,
            option: cols[1].parse().map_err(bad)?,
            annotator_id: cols[2].to_string(),
        });
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    parse_annotations(&crate::io::read_to_string(path)?, &path.display().to_string())
}

pub fn write_annotations(records: &[AnnotationRecord]) -> String {
    let mut s = String::from("fact_id\toption\tannotator_id\n");
    for r in records {
        s.push_str(&format!("{}\t{}\t{}\n", r.fact_id, r.option, r.annotator_id));
    }
    s
}

/// Annotator ids in order of first appearance.
pub fn annotators(records: &[AnnotationRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.annotator_id.clone()))
        .map(|r| r.annotator_id.clone())
        .collect()
}

fn by_annotator(records: &[AnnotationRecord], annotator: &str) -> Result<BTreeMap<usize, AnnotationOption>> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.annotator_id == annotator) {
        if out.insert(r.fact_id, r.option).is_some() {
            return Err(Error::Validation(format!(
                "annotator {annotator} labels fact {} twice",
                r.fact_id
            )));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// `(precision, recall, f1, undefined)` for a class with the given counts.
/// Undefined precision or recall is reported as 0.
fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64, bool) {
    let ratio = |a: u64, b: u64| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let undefined = p.is_none() || r.is_none();
    let (p, r) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f, undefined)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub confusion: Confusion,
    /// Precision, recall, and F1 with `entailed` as the positive class.
    pub precision: f64,
    pub recall: f64,
    pub f1_binary: f64,
    pub f1_macro: f64,
    /// Precision or recall of the entailed class had a zero denominator.
    pub degenerate: bool,
    /// Precision of the not-entailed class, if any fact was predicted so.
    pub not_entailed_precision: Option<f64>,
    /// Gold rows marked inferable-but-not-retrieved (options 2 and 2p).
    pub retrieval_misses: u64,
    pub kappa_collapsed: Option<f64>,
    pub kappa_options: Option<f64>,
}

impl EvalReport {
    /// Error rate of not-entailed predictions.
    pub fn measured_epsilon(&self) -> Option<f64> {
        self.not_entailed_precision.map(|p| 1.0 - p)
    }
}

pub fn f1_against_annotations(predictions: &[GapLabel], gold: &BTreeMap<usize, bool>) -> Result<EvalReport> {
    let pred: BTreeMap<usize, bool> = predictions.iter().map(|l| (l.fact_id, l.entailed)).collect();
    let mut c = Confusion::default();
    for (&id, &g) in gold {
        let p = *pred.get(&id).ok_or(Error::MissingForFact {
            what: "prediction",
            fact_id: id,
        })?;
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no gold annotations".into()));
    }
    let (precision, recall, f1_binary, degenerate) = prf(c.tp, c.fp, c.fn_);
    let (_, _, f1_negative, _) = prf(c.tn, c.fn_, c.fp);
    Ok(EvalReport {
        n: gold.len() as u64,
        confusion: c,
        precision,
        recall,
        f1_binary,
        f1_macro: (f1_binary + f1_negative) / 2.0,
        degenerate,
        not_entailed_precision: (c.tn + c.fn_ > 0).then(|| c.tn as f64 / (c.tn + c.fn_) as f64),
        retrieval_misses: 0,
        kappa_collapsed: None,
        kappa_options: None,
    })
}

/// Scores predictions against the first annotator; kappa uses the first
/// two annotators on the facts both labeled.
pub fn evaluate(predictions: &[GapLabel], records: &[AnnotationRecord]) -> Result<EvalReport> {
    let ids = annotators(records);
    let first = ids.first().ok_or_else(|| Error::InvalidArgument("no annotations".into()))?;
    let gold_opts = by_annotator(records, first)?;
    let gold: BTreeMap<usize, bool> = gold_opts.iter().map(|(k, v)| (*k, v.entailed())).collect();
    let mut report = f1_against_annotations(predictions, &gold)?;
    report.retrieval_misses = gold_opts
        .values()
        .filter(|o| matches!(o, AnnotationOption::NotRetrieved | AnnotationOption::PartlyNotRetrieved))
        .count() as u64;
    if let Some(second) = ids.get(1) {
        let other = by_annotator(records, second)?;
        let shared: Vec<(AnnotationOption, AnnotationOption)> = gold_opts
            .iter()
            .filter_map(|(id, a)| other.get(id).map(|b| (*a, *b)))
            .collect();
        if !shared.is_empty() {
            let (a, b): (Vec<_>, Vec<_>) = shared.into_iter().unzip();
            report.kappa_options = Some(cohens_kappa(&a, &b)?);
            let ca: Vec<bool> = a.iter().map(|o| o.entailed()).collect();
            let cb: Vec<bool> = b.iter().map(|o| o.entailed()).collect();
            report.kappa_collapsed = Some(cohens_kappa(&ca, &cb)?);
        }
    }
    Ok(report)
}

/// Cohen's kappa; 1.0 when chance agreement is certain and the labels agree.
pub fn cohens_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "kappa over lists of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("kappa over empty lists".into()));
    }
    // Integer counts keep the result exact up to the final division.
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut ma: BTreeMap<&T, u128> = BTreeMap::new();
    let mut mb: BTreeMap<&T, u128> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    let chance: u128 = ma.iter().map(|(k, ca)| ca * mb.get(k).copied().unwrap_or(0)).sum();
    if chance == n * n {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    Ok((agree as f64 * n as f64 - chance as f64) / ((n * n - chance) as f64))
}

/// Disagreements between two connotation annotations, split by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnotationDisagreement {
    pub agree: u64,
    pub neutral_vs_polar: u64,
    pub polar_vs_polar: u64,
}

pub fn connotation_disagreement(a: &[Connotation], b: &[Connotation]) -> Result<ConnotationDisagreement> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("connotation lists differ in length".into()));
    }
    let mut d = ConnotationDisagreement::default();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            d.agree += 1;
        } else if *x == Connotation::Neutral || *y == Connotation::Neutral {
            d.neutral_vs_polar += 1;
        } else {
            d.polar_vs_polar += 1;
        }
    }
    Ok(d)
}

pub const MIN_RESAMPLES: usize = 100;

/// Paired bootstrap over items: the fraction of resamples in which the
/// accuracy of `a` does not exceed that of `b`.
pub fn bootstrap_percentile_test(a: &[bool], b: &[bool], resamples: usize, seed: u64, exec: Exec) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs two equal-length lists of at least 2 items (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least {MIN_RESAMPLES} resamples")));
    }
    let n = a.len();
    let hits = exec.sum_range(resamples, |r| {
        let mut rng = seed::rng(seed::item(seed, r as u64));
        let mut diff: i64 = 0;
        for _ in 0..n {
            let i = rand::Rng::random_range(&mut rng, 0..n);
            diff += a[i] as i64 - b[i] as i64;
        }
        (diff <= 0) as u64
    });
    Ok(hits as f64 / resamples as f64)
}
