//! `infogap` command line.

mod backend;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use infogap::align::{align_articles, build_paragraph_graph};
use infogap::connotation;
use infogap::corpus::{load_article, pair_articles, read_facts, Article, Direction};
use infogap::decompose::{decompose_article, embed_sentences, map_facts_to_sentences, FactedArticle};
use infogap::eval::{bootstrap_percentile_test, evaluate, read_annotations, AnnotationRecord};
use infogap::matching::{infogap as match_facts, GapLabel};
use infogap::pipeline::{
    analyze_reports, layout, read_alignments, read_report, run_pipeline, write_dir_atomically, Epsilon, RunConfig,
};
use infogap::report::render_markdown;
use infogap::stats::regression::write_csv;
use infogap::{io, Exec};

use backend::{Backend, BackendArgs};

#[derive(Debug, Parser)]
#[command(name = "infogap", version, about = "Fact-level information gaps between two language versions of an article")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Params {
    /// Direction to run, e.g. `en->fr`; repeatable. Default: both.
    #[arg(long = "direction")]
    directions: Vec<Direction>,
    /// Candidates retrieved per fact.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Neighbours in the hubness estimate.
    #[arg(long, default_value_t = 5)]
    k_nn: usize,
    /// Background sample size for hubness.
    #[arg(long, default_value_t = 50)]
    hub_sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo draws in the imbalance test.
    #[arg(long = "draws", short = 'S', default_value_t = 1000)]
    draws: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Classifier error rate for event bounds: a number or `measured`.
    #[arg(long, default_value = "measured")]
    epsilon: Epsilon,
}

impl Params {
    fn config(&self, backend: &Backend) -> Result<RunConfig> {
        let c = RunConfig {
            directions: self.directions.clone(),
            k: self.k,
            k_nn: self.k_nn,
            hub_sample: self.hub_sample,
            seed: self.seed,
            draws: self.draws,
            alpha: self.alpha,
            epsilon: self.epsilon,
            backend: backend.config.clone(),
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose an article into facts mapped to sentences.
    Decompose {
        #[arg(long)]
        article: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Label each sentence's connotation toward the subject.
    Connotate {
        #[arg(long)]
        article: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Retrieve candidate target facts for every source fact.
    Align {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Judge each source fact against its aligned candidates.
    Match {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score gap labels against annotations.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Second label file to compare with a paired bootstrap test.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Corpus-level statistics over finished runs.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Re-render report.md from report.json.
    Report {
        run: PathBuf,
        /// Print instead of writing into the run directory.
        #[arg(long)]
        stdout: bool,
    },
    /// Run every stage on an article pair.
    Run {
        /// First article (JSON).
        #[arg(long)]
        a: PathBuf,
        /// Second article (JSON), in another language.
        #[arg(long)]
        b: PathBuf,
        /// Run directory; replaced atomically.
        #[arg(long)]
        out: PathBuf,
        /// Annotations for one direction, as `en->fr=path.tsv`; repeatable.
        #[arg(long = "annotations", value_parser = parse_annotation_arg)]
        annotations: Vec<(Direction, PathBuf)>,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct PairArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Facts of the source article; decomposed afresh when absent.
    #[arg(long)]
    source_facts: Option<PathBuf>,
    #[arg(long)]
    target_facts: Option<PathBuf>,
}

fn parse_annotation_arg(s: &str) -> Result<(Direction, PathBuf), String> {
    let (d, p) = s.split_once('=').ok_or_else(|| format!("expected DIRECTION=PATH, got {s:?}"))?;
    let d: Direction = d.parse().map_err(|e: infogap::Error| e.to_string())?;
    Ok((d, PathBuf::from(p)))
}

fn faced(article: &Path, facts: Option<&Path>, backend: &Backend, config: &RunConfig, exec: Exec) -> Result<FactedArticle> {
    let article = load_article(article)?;
    match facts {
        Some(f) => Ok(FactedArticle::embed(article, read_facts(f)?, &backend.providers)?),
        None => decompose_mapped(&article, backend, config, exec),
    }
}

fn decompose_mapped(article: &Article, backend: &Backend, config: &RunConfig, exec: Exec) -> Result<FactedArticle> {
    let mut fa = decompose_article(article, &backend.providers, exec)?;
    let sentences = embed_sentences(article, &backend.providers)?;
    let map = map_facts_to_sentences(&fa, &sentences, &config.sentence_config(exec))?;
    map.apply(&mut fa.facts);
    Ok(fa)
}

fn load_pair(pair: &PairArgs, backend: &Backend, config: &RunConfig, exec: Exec) -> Result<(FactedArticle, FactedArticle)> {
    let s = faced(&pair.source, pair.source_facts.as_deref(), backend, config, exec).context("source article")?;
    let t = faced(&pair.target, pair.target_facts.as_deref(), backend, config, exec).context("target article")?;
    Ok((s, t))
}

fn gold_of(records: &[AnnotationRecord]) -> Vec<&AnnotationRecord> {
    match records.first() {
        Some(first) => records.iter().filter(|r| r.annotator_id == first.annotator_id).collect(),
        None => Vec::new(),
    }
}

fn correctness(labels: &[GapLabel], gold: &[&AnnotationRecord]) -> Result<Vec<bool>> {
    let pred: BTreeMap<usize, bool> = labels.iter().map(|l| (l.fact_id, l.entailed)).collect();
    gold.iter()
        .map(|r| match pred.get(&r.fact_id) {
            Some(p) => Ok(*p == r.collapsed()),
            None => bail!("no prediction for fact {}", r.fact_id),
        })
        .collect()
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Decompose {
            article,
            out,
            params,
            backend,
        } => {
            let backend = backend.build()?;
            let config = params.config(&backend)?;
            let fa = decompose_mapped(&load_article(&article)?, &backend, &config, exec)?;
            io::write_jsonl(&out, &fa.facts)?;
            backend.log_calls();
            eprintln!("{} facts -> {}", fa.facts.len(), out.display());
        }
        Command::Connotate { article, out, backend } => {
            let backend = backend.build()?;
            let article = load_article(&article)?;
            let labels = connotation::label_sentences(&article, backend.providers.connotation.as_ref(), exec)?;
            io::write_jsonl(&out, &connotation::to_records(&labels))?;
            backend.log_calls();
            eprintln!("{} sentences -> {}", labels.len(), out.display());
        }
        Command::Align {
            pair,
            out,
            params,
            backend,
        } => {
            let backend = backend.build()?;
            let config = params.config(&backend)?;
            let (s, t) = load_pair(&pair, &backend, &config, exec)?;
            let graph = build_paragraph_graph(&s, &t)?;
            let set = align_articles(&s, &graph, &t, &config.align_config(exec))?;
            io::write_jsonl(&out, &set.entries)?;
            backend.log_calls();
            eprintln!("{} aligned facts -> {}", set.entries.len(), out.display());
        }
        Command::Match {
            pair,
            alignments,
            out,
            params,
            backend,
        } => {
            let backend = backend.build()?;
            let config = params.config(&backend)?;
            let (s, t) = load_pair(&pair, &backend, &config, exec)?;
            let direction = Direction::new(s.article.language_code.clone(), t.article.language_code.clone());
            let pair = pair_articles(s, t, &direction)?;
            let set = read_alignments(&alignments, config.align_config(exec))?;
            let labels = match_facts(&pair, &set, backend.providers.judge.as_ref(), exec)?;
            io::write_jsonl(&out, &labels)?;
            backend.log_calls();
            let shared = labels.iter().filter(|l| l.entailed).count();
            eprintln!("{shared}/{} facts shared -> {}", labels.len(), out.display());
        }
        Command::Eval {
            labels,
            annotations,
            compare,
            resamples,
            seed,
        } => {
            let labels: Vec<GapLabel> = io::read_jsonl(&labels)?;
            let records = read_annotations(&annotations)?;
            let report = evaluate(&labels, &records)?;
            match compare {
                None => print_json(&report)?,
                Some(other) => {
                    let other: Vec<GapLabel> = io::read_jsonl(&other)?;
                    let other_report = evaluate(&other, &records)?;
                    let gold = gold_of(&records);
                    let a = correctness(&labels, &gold)?;
                    let b = correctness(&other, &gold)?;
                    let p = bootstrap_percentile_test(&a, &b, resamples, seed, exec)?;
                    print_json(&serde_json::json!({
                        "labels": report,
                        "compare": other_report,
                        "bootstrap": {"resamples": resamples, "seed": seed, "p_value": p},
                    }))?;
                }
            }
        }
        Command::Analyze { out, runs } => {
            let reports = runs
                .iter()
                .map(|r| read_report(r).with_context(|| format!("reading run {}", r.display())))
                .collect::<Result<Vec<_>>>()?;
            let (analysis, points) = analyze_reports(&reports)?;
            let mut csv = Vec::new();
            write_csv(&mut csv, &points)?;
            let mut json = serde_json::to_string_pretty(&analysis)?;
            json.push('\n');
            write_dir_atomically(
                &out,
                &[
                    ("analysis.json".to_string(), json.into_bytes()),
                    ("regression.csv".to_string(), csv),
                ],
            )?;
            eprintln!("analyzed {} runs -> {}", reports.len(), out.display());
        }
        Command::Report { run, stdout } => {
            let report = read_report(&run)?;
            let md = render_markdown(&report);
            if stdout {
                print!("{md}");
            } else {
                io::write_atomic(&run.join(layout::REPORT_MD), md.as_bytes())?;
            }
        }
        Command::Run {
            a,
            b,
            out,
            annotations,
            params,
            backend,
        } => {
            let backend = backend.build()?;
            let config = params.config(&backend)?;
            let (a, b) = (load_article(&a)?, load_article(&b)?);
            let mut ann = BTreeMap::new();
            for (d, path) in annotations {
                if ann.insert(d.clone(), read_annotations(&path)?).is_some() {
                    bail!("annotations for {d} given twice");
                }
            }
            let report = run_pipeline(&a, &b, &config, &backend.providers, &ann, exec, &out)?;
            backend.log_calls();
            for d in &report.directions {
                eprintln!(
                    "{}: {} facts, overlap {:.3}, {} event gaps",
                    d.direction,
                    d.facts,
                    d.overlap_ratio,
                    d.events.gaps.len()
                );
            }
            eprintln!("report -> {}", out.join(layout::REPORT_MD).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
