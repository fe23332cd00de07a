//! Run reports: a versioned JSON document and a Markdown rendering of it.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::connotation::{Connotation, Distribution};
use crate::corpus::Direction;
use crate::eval::EvalReport;
use crate::pipeline::RunConfig;
use crate::stats::events::EventReport;
use crate::stats::imbalance::ImbalanceResult;
use crate::stats::PartitionCounts;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: RunConfig,
    pub articles: Vec<ArticleSummary>,
    pub directions: Vec<DirectionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleSummary {
    pub language: String,
    pub title: String,
    pub subject: String,
    pub is_lgbt: Option<bool>,
    pub nationality: Option<String>,
    pub paragraphs: usize,
    pub facts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactRef {
    pub fact_id: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedFact {
    pub fact_id: usize,
    pub paragraph_id: usize,
    pub text: String,
    pub connotation: Connotation,
    pub supporting: Vec<FactRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueFact {
    pub fact_id: usize,
    pub paragraph_id: usize,
    pub text: String,
    pub connotation: Connotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonSource {
    Fixed,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonUsed {
    pub value: f64,
    pub source: EpsilonSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub direction: Direction,
    pub bio_id: String,
    pub is_lgbt: Option<bool>,
    pub nationality: Option<String>,
    pub facts: usize,
    pub overlap_ratio: f64,
    pub shared: Vec<SharedFact>,
    pub unique: Vec<UniqueFact>,
    pub connotation: Distribution,
    pub partition: PartitionCounts,
    pub imbalance: Vec<ImbalanceResult>,
    pub epsilon: EpsilonUsed,
    pub events: EventReport,
    pub eval: Option<EvalReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn direction(&self, d: &Direction) -> Option<&DirectionReport> {
        self.directions.iter().find(|r| &r.direction == d)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_bound(x: f64) -> String {
    format!("{x:.6e}")
}

fn text_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// Renders the report as Markdown. The output depends only on `report`.
pub fn render_markdown(report: &Report) -> String {
    let mut md = String::new();
    let subject = report.articles.first().map(|a| a.subject.as_str()).unwrap_or("");
    let _ = writeln!(md, "# Information gaps: {subject}\n");
    let _ = writeln!(md, "Schema version {}. Seed {}.\n", report.schema_version, report.config.seed);
    let _ = writeln!(md, "| language | title | paragraphs | facts |");
    let _ = writeln!(md, "|---|---|---|---|");
    for a in &report.articles {
        let _ = writeln!(md, "| {} | {} | {} | {} |", a.language, text_cell(&a.title), a.paragraphs, a.facts);
    }
    for d in &report.directions {
        let _ = writeln!(md, "\n## {}\n", d.direction);
        let shared = d.shared.len();
        let _ = writeln!(
            md,
            "Overlap ratio: **{}** ({shared} of {} facts found in the {} article).\n",
            fmt_f(d.overlap_ratio),
            d.facts,
            d.direction.target
        );
        let c = &d.connotation;
        let _ = writeln!(
            md,
            "Connotation of source facts: positive {}, neutral {}, negative {}.\n",
            fmt_f(c.positive),
            fmt_f(c.neutral),
            fmt_f(c.negative)
        );

        let _ = writeln!(md, "### Imbalance tests\n");
        let _ = writeln!(md, "| polarity | x/n (neutral) | x/n (polar) | K/S | p-value | flagged |");
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for r in &d.imbalance {
            let _ = writeln!(
                md,
                "| {} | {}/{} | {}/{} | {}/{} | {} | {} |",
                r.polarity.as_str(),
                r.x,
                r.n,
                r.x_pos,
                r.n_pos,
                r.k,
                r.s,
                fmt_f(r.p_value),
                if r.imbalanced { "yes" } else { "no" }
            );
        }

        let _ = writeln!(md, "\n### Event gaps\n");
        let eps_src = match d.epsilon.source {
            EpsilonSource::Fixed => "fixed",
            EpsilonSource::Measured => "measured",
        };
        let _ = writeln!(md, "Classifier error rate epsilon = {} ({eps_src}).\n", fmt_f(d.epsilon.value));
        if d.events.gaps.is_empty() {
            let _ = writeln!(md, "No paragraph with a positive fact is missing entirely.");
        } else {
            let _ = writeln!(md, "| paragraph | N_V | positive facts | error bound |");
            let _ = writeln!(md, "|---|---|---|---|");
            for g in &d.events.gaps {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    g.paragraph_id,
                    g.n_v,
                    g.positive_count,
                    fmt_bound(g.error_bound.bound)
                );
            }
        }
        let others = d.events.unfiltered.len() - d.events.gaps.len();
        if others > 0 {
            let _ = writeln!(md, "\n{others} further missing paragraph(s) have no positive fact.");
        }

        if let Some(e) = &d.eval {
            let _ = writeln!(md, "\n### Evaluation\n");
            let _ = writeln!(
                md,
                "F1 (entailed) {}, macro-F1 {}, precision {}, recall {} over {} annotated facts.",
                fmt_f(e.f1_binary),
                fmt_f(e.f1_macro),
                fmt_f(e.precision),
                fmt_f(e.recall),
                e.n
            );
            if let Some(k) = e.kappa_collapsed {
                let _ = writeln!(md, "Cohen's kappa: {} (collapsed), {} (options).", fmt_f(k), fmt_f(e.kappa_options.unwrap_or(f64::NAN)));
            }
            let _ = writeln!(md, "Retrieval misses: {}.", e.retrieval_misses);
        }

        let _ = writeln!(md, "\n### Shared facts\n");
        for f in &d.shared {
            let ids: Vec<String> = f.supporting.iter().map(|s| s.fact_id.to_string()).collect();
            let _ = writeln!(md, "- [{}] {} ({}; supported by {})", f.fact_id, f.text, f.connotation, ids.join(", "));
        }
        let _ = writeln!(md, "\n### Unique facts\n");
        for f in &d.unique {
            let _ = writeln!(md, "- [{}] {} ({}, paragraph {})", f.fact_id, f.text, f.connotation, f.paragraph_id);
        }
    }
    md
}
