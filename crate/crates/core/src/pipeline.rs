//! End-to-end runs over one article pair, and corpus-level analysis over
//! many runs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::align::{align_articles, build_paragraph_graph, AlignConfig, AlignmentEntry, AlignmentSet};
use crate::connotation::{self, connotation_distribution, Distribution, FactLabels, SentenceLabels};
use crate::corpus::{pair_articles, write_facts, Article, ArticlePair, Direction};
use crate::decompose::{decompose_article, embed_sentences, map_facts_to_sentences, FactedArticle, ForcedAlignConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AnnotationRecord};
use crate::exec::Exec;
use crate::io;
use crate::matching::{infogap, GapLabel};
use crate::providers::http::{
    CachedEndpoint, ChatClient, EndpointOptions, HttpEmbedder, LlmConnotationJudge, LlmDecomposer, LlmEntailmentJudge,
    Transport,
};
use crate::providers::mock::{CueJudge, CueLists, HashEmbedder, IdentityDecomposer, OracleEntry, OracleJudge};
use crate::providers::prompt::PromptTemplates;
use crate::providers::Providers;
use crate::report::{
    render_markdown, ArticleSummary, DirectionReport, EpsilonSource, EpsilonUsed, FactRef, Report, SharedFact,
    UniqueFact, SCHEMA_VERSION,
};
use crate::seed;
use crate::stats::events::find_missing_events;
use crate::stats::imbalance::{imbalance_for, Polarity};
use crate::stats::overlap::{overlap_summary, BioMeta, OverlapSummary};
use crate::stats::regression::{bio_points, fit_binomial_regression, simulate_inclusion_rate, RegressionDataPoint, RegressionFit};
use crate::stats::{partition_counts, PartitionCounts, Tally};

/// Error rate of not-entailed predictions used in event-gap bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Fixed(f64),
    /// Taken from the evaluation against the direction's annotations.
    Measured,
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Fixed(v) => write!(f, "{v}"),
            Epsilon::Measured => f.write_str("measured"),
        }
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("measured") {
            return Ok(Epsilon::Measured);
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("epsilon {s:?} is neither a number nor \"measured\"")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("epsilon {v} outside [0, 1]")));
        }
        Ok(Epsilon::Fixed(v))
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Epsilon::Fixed(v) => s.serialize_f64(*v),
            Epsilon::Measured => s.serialize_str("measured"),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Epsilon::Fixed(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Identity of the backends, as echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum BackendConfig {
    Mock {
        embed_dim: usize,
        embed_seed: u64,
        oracle_sha256: Option<String>,
        cues_sha256: Option<String>,
    },
    Http {
        embed_endpoint: String,
        embed_model: String,
        judge_endpoint: String,
        judge_model: String,
        templates_sha256: String,
    },
}

/// Everything that influences results. Operational settings (cache
/// location, offline mode, credentials) are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Empty means both directions of the pair.
    pub directions: Vec<Direction>,
    pub k: usize,
    pub k_nn: usize,
    pub hub_sample: usize,
    pub seed: u64,
    #[serde(rename = "S")]
    pub draws: u64,
    pub alpha: f64,
    pub epsilon: Epsilon,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            directions: Vec::new(),
            k: 2,
            k_nn: 5,
            hub_sample: 50,
            seed: 0,
            draws: 1000,
            alpha: 0.05,
            epsilon: Epsilon::Measured,
            backend: MockSetup::default().backend_config(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.k_nn == 0 {
            return bad("k_nn must be at least 1");
        }
        if self.draws == 0 {
            return bad("S must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if let Epsilon::Fixed(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn align_config(&self, exec: Exec) -> AlignConfig {
        AlignConfig {
            k: self.k,
            k_nn: self.k_nn,
            background_sample: self.hub_sample,
            seed: seed::derive(self.seed, "align"),
            exec,
        }
    }

    pub fn sentence_config(&self, exec: Exec) -> ForcedAlignConfig {
        ForcedAlignConfig {
            k_nn: self.k_nn,
            background_sample: self.hub_sample,
            seed: seed::derive(self.seed, "sentence-align"),
            exec,
        }
    }

    /// Directions to run for articles in `a` and `b`.
    pub fn resolve_directions(&self, a: &str, b: &str) -> Result<Vec<Direction>> {
        if self.directions.is_empty() {
            return Ok(vec![Direction::new(a, b), Direction::new(b, a)]);
        }
        for d in &self.directions {
            let ok = (d.source == a && d.target == b) || (d.source == b && d.target == a);
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "direction {d} does not match article languages {a} and {b}"
                )));
            }
        }
        Ok(self.directions.clone())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Offline mock backends.
#[derive(Debug, Clone)]
pub struct MockSetup {
    pub embed_dim: usize,
    pub embed_seed: u64,
    pub oracle: Option<Vec<OracleEntry>>,
    pub cues: Option<CueLists>,
}

impl Default for MockSetup {
    fn default() -> Self {
        MockSetup {
            embed_dim: 256,
            embed_seed: 0,
            oracle: None,
            cues: None,
        }
    }
}

impl MockSetup {
    pub fn backend_config(&self) -> BackendConfig {
        BackendConfig::Mock {
            embed_dim: self.embed_dim,
            embed_seed: self.embed_seed,
            oracle_sha256: self.oracle.as_ref().map(|o| sha256_hex(io::to_jsonl(o).as_bytes())),
            cues_sha256: self
                .cues
                .as_ref()
                .map(|c| sha256_hex(serde_json::to_string(c).expect("cues serialize").as_bytes())),
        }
    }

    pub fn providers(&self) -> Providers {
        let judge = match &self.oracle {
            Some(o) => OracleJudge::from_entries(o.iter().cloned()),
            None => OracleJudge::containment(),
        };
        Providers::new(
            Arc::new(HashEmbedder::new(self.embed_dim, self.embed_seed)),
            Arc::new(IdentityDecomposer),
            Arc::new(judge),
            Arc::new(CueJudge::new(self.cues.clone().unwrap_or_default())),
        )
    }
}

/// Live backends behind one cached endpoint.
pub struct HttpSetup {
    pub embed_endpoint: String,
    pub embed_model: String,
    pub judge_endpoint: String,
    pub judge_model: String,
    pub templates: PromptTemplates,
    pub transport: Arc<dyn Transport>,
    pub options: EndpointOptions,
}

impl HttpSetup {
    pub fn backend_config(&self) -> BackendConfig {
        BackendConfig::Http {
            embed_endpoint: self.embed_endpoint.clone(),
            embed_model: self.embed_model.clone(),
            judge_endpoint: self.judge_endpoint.clone(),
            judge_model: self.judge_model.clone(),
            templates_sha256: self.templates.digest(),
        }
    }

    /// Providers plus the shared endpoint (for call accounting).
    pub fn build(&self) -> (Providers, Arc<CachedEndpoint>) {
        let endpoint = Arc::new(CachedEndpoint::new(self.transport.clone(), self.options.clone()));
        let templates = Arc::new(self.templates.clone());
        let chat = Arc::new(ChatClient::new(endpoint.clone(), &self.judge_endpoint, &self.judge_model));
        let providers = Providers::new(
            Arc::new(HttpEmbedder::new(endpoint.clone(), &self.embed_endpoint, &self.embed_model)),
            Arc::new(LlmDecomposer::new(chat.clone(), templates.clone())),
            Arc::new(LlmEntailmentJudge::new(chat.clone(), templates.clone())),
            Arc::new(LlmConnotationJudge::new(chat, templates)),
        );
        (providers, endpoint)
    }
}

/// One article after decomposition, sentence mapping, and connotation.
#[derive(Debug, Clone)]
pub struct ArticleRun {
    pub faced: FactedArticle,
    pub sentence_labels: SentenceLabels,
    pub fact_labels: FactLabels,
}

pub fn prepare_article(article: &Article, providers: &Providers, config: &RunConfig, exec: Exec) -> Result<ArticleRun> {
    let lang = &article.language_code;
    let mut faced = decompose_article(article, providers, exec).map_err(|e| e.context(format!("decompose [{lang}]")))?;
    let sentences = embed_sentences(article, providers).map_err(|e| e.context(format!("embed sentences [{lang}]")))?;
    let map = map_facts_to_sentences(&faced, &sentences, &config.sentence_config(exec))
        .map_err(|e| e.context(format!("sentence alignment [{lang}]")))?;
    map.apply(&mut faced.facts);
    let sentence_labels = connotation::label_sentences(article, providers.connotation.as_ref(), exec)
        .map_err(|e| e.context(format!("connotation [{lang}]")))?;
    let fact_labels = connotation::propagate_labels(faced.facts.iter().map(|f| f.fact_id), &sentence_labels, &map)?;
    Ok(ArticleRun {
        faced,
        sentence_labels,
        fact_labels,
    })
}

#[derive(Debug, Clone)]
pub struct DirectionRun {
    pub alignment: AlignmentSet,
    pub labels: Vec<GapLabel>,
    pub report: DirectionReport,
}

pub fn run_direction(
    source: &ArticleRun,
    target: &ArticleRun,
    direction: &Direction,
    providers: &Providers,
    config: &RunConfig,
    annotations: Option<&[AnnotationRecord]>,
    exec: Exec,
) -> Result<DirectionRun> {
    let ctx = |stage: &str| format!("{stage} [{direction}]");
    let pair = pair_articles(source.faced.clone(), target.faced.clone(), direction)?;
    let graph = build_paragraph_graph(&pair.source, &pair.target).map_err(|e| e.context(ctx("paragraph graph")))?;
    let alignment = align_articles(&pair.source, &graph, &pair.target, &config.align_config(exec))
        .map_err(|e| e.context(ctx("align")))?;
    let labels = infogap(&pair, &alignment, providers.judge.as_ref(), exec).map_err(|e| e.context(ctx("match")))?;
    let report = summarize_direction(&pair, &labels, &source.fact_labels, annotations, config, exec)
        .map_err(|e| e.context(ctx("analyze")))?;
    Ok(DirectionRun {
        alignment,
        labels,
        report,
    })
}

/// Statistics and fact listings for one direction.
pub fn summarize_direction(
    pair: &ArticlePair,
    labels: &[GapLabel],
    fact_labels: &FactLabels,
    annotations: Option<&[AnnotationRecord]>,
    config: &RunConfig,
    exec: Exec,
) -> Result<DirectionReport> {
    let direction = pair.direction();
    let eval = annotations.map(|a| evaluate(labels, a)).transpose()?;
    let epsilon = match config.epsilon {
        Epsilon::Fixed(value) => EpsilonUsed {
            value,
            source: EpsilonSource::Fixed,
        },
        Epsilon::Measured => {
            let e = eval.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "epsilon is \"measured\" but direction {direction} has no annotations; supply annotations or a fixed epsilon"
                ))
            })?;
            let value = e.measured_epsilon().ok_or_else(|| {
                Error::Validation(format!(
                    "cannot measure epsilon for {direction}: no annotated fact was predicted not entailed"
                ))
            })?;
            EpsilonUsed {
                value,
                source: EpsilonSource::Measured,
            }
        }
    };
    let partition = partition_counts(labels, fact_labels)?;
    let imbalance = [Polarity::PositiveOmission, Polarity::NegativeInclusion]
        .into_iter()
        .map(|p| {
            let s = seed::derive(config.seed, &format!("imbalance/{}/{}", direction.slug(), p.as_str()));
            imbalance_for(&partition, p, config.draws, s, config.alpha, exec)
        })
        .collect::<Result<Vec<_>>>()?;
    let events = find_missing_events(&pair.source, labels, fact_labels, epsilon.value)?;
    let conn = |id: usize| {
        fact_labels
            .get(&id)
            .map(|l| l.value)
            .ok_or(Error::MissingForFact { what: "connotation label", fact_id: id })
    };
    let target_text = |id: usize| {
        pair.target
            .position_of(id)
            .map(|j| pair.target.facts[j].text.clone())
            .unwrap_or_default()
    };
    let mut shared = Vec::new();
    let mut unique = Vec::new();
    for l in labels {
        let i = pair.source.position_of(l.fact_id).ok_or(Error::MissingForFact {
            what: "source fact",
            fact_id: l.fact_id,
        })?;
        let f = &pair.source.facts[i];
        if l.entailed {
            shared.push(SharedFact {
                fact_id: f.fact_id,
                paragraph_id: f.paragraph_id,
                text: f.text.clone(),
                connotation: conn(f.fact_id)?,
                supporting: l
                    .supporting
                    .iter()
                    .map(|&id| FactRef {
                        fact_id: id,
                        text: target_text(id),
                    })
                    .collect(),
            });
        } else {
            unique.push(UniqueFact {
                fact_id: f.fact_id,
                paragraph_id: f.paragraph_id,
                text: f.text.clone(),
                connotation: conn(f.fact_id)?,
            });
        }
    }
    let article = &pair.source.article;
    Ok(DirectionReport {
        direction,
        bio_id: article.subject_name.clone(),
        is_lgbt: article.is_lgbt,
        nationality: article.nationality.clone(),
        facts: labels.len(),
        overlap_ratio: crate::stats::overlap::overlap_ratio(labels)?,
        shared,
        unique,
        connotation: connotation_distribution(labels.iter().map(|l| &fact_labels[&l.fact_id].value))?,
        partition,
        imbalance,
        epsilon,
        events,
        eval,
    })
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub articles: Vec<ArticleRun>,
    pub directions: Vec<DirectionRun>,
}

pub fn run_pair(
    a: &Article,
    b: &Article,
    config: &RunConfig,
    providers: &Providers,
    annotations: &BTreeMap<Direction, Vec<AnnotationRecord>>,
    exec: Exec,
) -> Result<RunOutput> {
    config.validate()?;
    if a.language_code == b.language_code {
        return Err(Error::InvalidArgument(format!(
            "both articles are in {}",
            a.language_code
        )));
    }
    let directions = config.resolve_directions(&a.language_code, &b.language_code)?;
    for d in annotations.keys() {
        if !directions.contains(d) {
            return Err(Error::InvalidArgument(format!("annotations given for {d}, which is not being run")));
        }
    }
    let mut resolved = config.clone();
    resolved.directions = directions.clone();

    let runs = [
        prepare_article(a, providers, &resolved, exec)?,
        prepare_article(b, providers, &resolved, exec)?,
    ];
    let by_lang = |lang: &str| runs.iter().find(|r| r.faced.article.language_code == lang).unwrap();
    let mut out = Vec::new();
    for d in &directions {
        out.push(run_direction(
            by_lang(&d.source),
            by_lang(&d.target),
            d,
            providers,
            &resolved,
            annotations.get(d).map(Vec::as_slice),
            exec,
        )?);
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        config: resolved,
        articles: runs
            .iter()
            .map(|r| {
                let a = &r.faced.article;
                ArticleSummary {
                    language: a.language_code.clone(),
                    title: a.title.clone(),
                    subject: a.subject_name.clone(),
                    is_lgbt: a.is_lgbt,
                    nationality: a.nationality.clone(),
                    paragraphs: a.paragraphs.len(),
                    facts: r.faced.facts.len(),
                }
            })
            .collect(),
        directions: out.iter().map(|d| d.report.clone()).collect(),
    };
    Ok(RunOutput {
        report,
        articles: runs.into_iter().collect(),
        directions: out,
    })
}

/// File names inside a run directory.
pub mod layout {
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_MD: &str = "report.md";
    pub const CONFIG: &str = "config.json";
    pub const FAILED: &str = "FAILED";

    pub fn facts(lang: &str) -> String {
        format!("facts/{lang}.jsonl")
    }
    pub fn connotations(lang: &str) -> String {
        format!("connotations/{lang}.jsonl")
    }
    pub fn alignments(slug: &str) -> String {
        format!("alignments/{slug}.jsonl")
    }
    pub fn labels(slug: &str) -> String {
        format!("labels/{slug}.jsonl")
    }
}

fn sibling(out: &Path, suffix: &str) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("output path {} has no file name", out.display())))?;
    Ok(out.with_file_name(format!("{}{suffix}", name.to_string_lossy())))
}

/// Writes a complete directory of files, or nothing: files are staged
/// next to `out` and renamed into place. On failure the staged files are
/// kept as `<out>.failed/` with a `FAILED` marker.
pub fn write_dir_atomically(out: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let staging = sibling(out, &format!(".staging-{}", std::process::id()))?;
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = (|| {
        for (name, bytes) in files {
            io::write_atomic(&staging.join(name), bytes)?;
        }
        if out.exists() {
            let is_run = out.join(layout::REPORT_JSON).exists()
                || out.join(layout::CONFIG).exists()
                || fs::read_dir(out).map(|mut d| d.next().is_none()).unwrap_or(false);
            if !is_run {
                return Err(Error::InvalidArgument(format!(
                    "{} exists and is not a previous output directory",
                    out.display()
                )));
            }
            fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
        }
        fs::rename(&staging, out).map_err(|e| Error::io(out, e))
    })();
    if let Err(err) = &result {
        if staging.exists() {
            let failed = sibling(out, ".failed")?;
            let _ = fs::remove_dir_all(&failed);
            let _ = fs::write(staging.join(layout::FAILED), format!("{err}\n"));
            let _ = fs::rename(&staging, &failed);
        }
    }
    result
}

/// Serialized files of a finished run.
pub fn run_files(output: &RunOutput) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut config = serde_json::to_string_pretty(&output.report.config).expect("config serializes");
    config.push('\n');
    files.push((layout::CONFIG.to_string(), config.into_bytes()));
    for a in &output.articles {
        let lang = &a.faced.article.language_code;
        files.push((layout::facts(lang), io::to_jsonl(&a.faced.facts).into_bytes()));
        files.push((
            layout::connotations(lang),
            io::to_jsonl(&connotation::to_records(&a.sentence_labels)).into_bytes(),
        ));
    }
    for d in &output.directions {
        let slug = d.report.direction.slug();
        files.push((layout::alignments(&slug), io::to_jsonl(&d.alignment.entries).into_bytes()));
        files.push((layout::labels(&slug), io::to_jsonl(&d.labels).into_bytes()));
    }
    files.push((layout::REPORT_JSON.to_string(), output.report.to_json().into_bytes()));
    files.push((layout::REPORT_MD.to_string(), render_markdown(&output.report).into_bytes()));
    Ok(files)
}

/// Runs the pair and writes the run directory `out`.
pub fn run_pipeline(
    a: &Article,
    b: &Article,
    config: &RunConfig,
    providers: &Providers,
    annotations: &BTreeMap<Direction, Vec<AnnotationRecord>>,
    exec: Exec,
    out: &Path,
) -> Result<Report> {
    let output = run_pair(a, b, config, providers, annotations, exec)?;
    write_dir_atomically(out, &run_files(&output)?)?;
    Ok(output.report)
}

pub fn read_report(run_dir: &Path) -> Result<Report> {
    let report: Report = io::read_json(&run_dir.join(layout::REPORT_JSON))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "{}: report schema version {} (expected {SCHEMA_VERSION})",
            run_dir.display(),
            report.schema_version
        )));
    }
    Ok(report)
}

pub fn read_alignments(path: &Path, config: AlignConfig) -> Result<AlignmentSet> {
    let mut entries: Vec<AlignmentEntry> = io::read_jsonl(path)?;
    entries.sort_by_key(|e| e.src_fact_id);
    Ok(AlignmentSet { entries, config })
}

pub fn write_article_facts(path: &Path, faced: &FactedArticle) -> Result<()> {
    write_facts(path, &faced.facts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedBio {
    pub bio_id: String,
    pub polarity: Polarity,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutcome {
    pub fit: Option<RegressionFit>,
    pub error: Option<String>,
    /// Predicted inclusion rate per `conn/is_lgbt` cell of a converged fit.
    pub inclusion_rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionAnalysis {
    pub direction: Direction,
    pub bios: usize,
    pub overlap: OverlapSummary,
    pub connotation: Distribution,
    pub flagged: Vec<FlaggedBio>,
    pub event_gaps: usize,
    pub regression: RegressionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub runs: usize,
    pub directions: Vec<DirectionAnalysis>,
}

fn pooled_distribution(parts: &[PartitionCounts]) -> Result<Distribution> {
    let sum = |f: fn(&PartitionCounts) -> Tally| parts.iter().map(|p| f(p).total).sum::<u64>();
    let (p, u, n) = (sum(|c| c.positive), sum(|c| c.neutral), sum(|c| c.negative));
    let total = (p + u + n) as f64;
    if total == 0.0 {
        return Err(Error::InvalidArgument("no facts to pool".into()));
    }
    Ok(Distribution {
        positive: p as f64 / total,
        neutral: u as f64 / total,
        negative: n as f64 / total,
    })
}

/// Corpus-level analysis over finished runs. Bios are merged in `bio_id`
/// order, so the result does not depend on the order of `reports`.
pub fn analyze_reports(reports: &[Report]) -> Result<(AnalysisReport, Vec<RegressionDataPoint>)> {
    let mut by_direction: BTreeMap<Direction, Vec<&DirectionReport>> = BTreeMap::new();
    for r in reports {
        for d in &r.directions {
            by_direction.entry(d.direction.clone()).or_default().push(d);
        }
    }
    let mut all_points = Vec::new();
    let mut directions = Vec::new();
    for (direction, mut bios) in by_direction {
        bios.sort_by(|a, b| a.bio_id.cmp(&b.bio_id));
        let ratios: Vec<f64> = bios.iter().map(|b| b.overlap_ratio).collect();
        let meta: Vec<BioMeta> = bios
            .iter()
            .map(|b| BioMeta {
                bio_id: b.bio_id.clone(),
                nationality: b.nationality.clone(),
                is_lgbt: b.is_lgbt,
            })
            .collect();
        let points: Vec<RegressionDataPoint> = bios
            .iter()
            .flat_map(|b| bio_points(&b.bio_id, &direction, b.is_lgbt.unwrap_or(false), &b.partition))
            .collect();
        let regression = match fit_binomial_regression(&points) {
            Ok(fit) => {
                let mut inclusion_rates = BTreeMap::new();
                if fit.converged {
                    for conn in ["pos", "neutral", "neg"] {
                        for lgbt in [false, true] {
                            inclusion_rates.insert(
                                format!("{conn}/is_lgbt={lgbt}"),
                                simulate_inclusion_rate(&fit, conn, lgbt)?,
                            );
                        }
                    }
                }
                RegressionOutcome {
                    fit: Some(fit),
                    error: None,
                    inclusion_rates,
                }
            }
            Err(e) => RegressionOutcome {
                fit: None,
                error: Some(e.to_string()),
                inclusion_rates: BTreeMap::new(),
            },
        };
        let parts: Vec<PartitionCounts> = bios.iter().map(|b| b.partition).collect();
        directions.push(DirectionAnalysis {
            direction,
            bios: bios.len(),
            overlap: overlap_summary(&ratios, &meta)?,
            connotation: pooled_distribution(&parts)?,
            flagged: bios
                .iter()
                .flat_map(|b| {
                    b.imbalance.iter().filter(|r| r.imbalanced).map(|r| FlaggedBio {
                        bio_id: b.bio_id.clone(),
                        polarity: r.polarity,
                        p_value: r.p_value,
                    })
                })
                .collect(),
            event_gaps: bios.iter().map(|b| b.events.gaps.len()).sum(),
            regression,
        });
        all_points.extend(points);
    }
    Ok((
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            runs: reports.len(),
            directions,
        },
        all_points,
    ))
}
