//! Seeded synthetic inputs: a bilingual biography with planted ground
//! truth, geometric alignment fixtures, and a stand-in HTTP backend.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::connotation::Connotation;
use crate::corpus::{Article, Direction, Fact, Paragraph};
use crate::decompose::FactedArticle;
use crate::embedding::Embedding;
use crate::eval::{AnnotationOption, AnnotationRecord};
use crate::providers::mock::{CueLists, HashEmbedder, OracleEntry};
use crate::seed;

const SYLLABLES: &[&str] = &[
    "ta", "ve", "lo", "bru", "nik", "mar", "osk", "eli", "dor", "qua", "zen", "fi", "ra", "tum", "sol", "vek", "ari",
    "no", "pel", "gu", "sha", "mir", "ko", "bel",
];

const PLACES: &[&str] = &[
    "Lyon", "Oslo", "Porto", "Quito", "Dakar", "Hanoi", "Lima", "Riga", "Tunis", "Accra", "Perth", "Malmo", "Gdansk",
    "Bilbao", "Kyoto", "Tallinn", "Nantes", "Cusco", "Leeds", "Turin",
];

const FIRST: &[&str] = &["Marisol", "Ines", "Odile", "Amara", "Livia", "Noor", "Tamsin", "Yara"];
const LAST: &[&str] = &["Okafor", "Vantrel", "Lindqvist", "Morane", "Abaza", "Quillon", "Serrat", "Dunmore"];

/// `(en, fr)` sentence templates over `{s}` subject, `{w}` work, `{y}`
/// year, and `{p}` place. All share one shape so that only the slot
/// values tell sentences apart.
const POSITIVE: &[(&str, &str)] = &[
    ("{s} won the {w} prize in {p} in {y}.", "{s} reçoit le prix {w} à {p} en {y}."),
    ("Critics acclaimed {s} for {w} in {p} in {y}.", "La critique a salué {s} pour {w} à {p} en {y}."),
];
const NEGATIVE: &[(&str, &str)] = &[
    ("{s} was arrested during {w} in {p} in {y}.", "{s} est arrêtée pendant {w} à {p} en {y}."),
    ("{s} faced the {w} scandal in {p} in {y}.", "{s} affronte le scandale {w} à {p} en {y}."),
];
const NEUTRAL: &[(&str, &str)] = &[
    ("{s} moved to {w} in {p} in {y}.", "{s} s'installe à {w} à {p} en {y}."),
    ("{s} published {w} in {p} in {y}.", "{s} publie {w} à {p} en {y}."),
    ("{s} taught at {w} in {p} in {y}.", "{s} enseigne à {w} à {p} en {y}."),
    ("{s} recorded {w} in {p} in {y}.", "{s} enregistre {w} à {p} en {y}."),
    ("{s} married {w} in {p} in {y}.", "{s} épouse {w} à {p} en {y}."),
];

pub fn fixture_cues() -> CueLists {
    CueLists {
        positive: ["prize", "prix", "acclaimed", "salué"].map(String::from).to_vec(),
        negative: ["arrested", "arrêtée", "scandal", "scandale"].map(String::from).to_vec(),
    }
}

/// A bilingual biography pair with known shared facts.
#[derive(Debug, Clone)]
pub struct BioFixture {
    pub en: Article,
    pub fr: Article,
    /// Planted counterpart pairs in both directions.
    pub oracle: Vec<OracleEntry>,
    pub cues: CueLists,
    /// Two annotators per direction; the first one matches the truth.
    pub annotations: BTreeMap<Direction, Vec<AnnotationRecord>>,
    /// Whether each source fact has a counterpart, per direction.
    pub truth: BTreeMap<Direction, BTreeMap<usize, bool>>,
    /// Planted connotation of each fact, per language.
    pub connotations: BTreeMap<String, BTreeMap<usize, Connotation>>,
    /// Paragraph of `en` with no counterpart in `fr`.
    pub missing_paragraph: usize,
}

struct Planted {
    en: String,
    fr: String,
    conn: Connotation,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    let mut c = w.chars();
    let first = c.next().unwrap().to_uppercase().collect::<String>();
    first + c.as_str()
}

fn planted(rng: &mut ChaCha8Rng, subject: &str, used: &mut BTreeSet<String>, conn: Option<Connotation>) -> Planted {
    let conn = conn.unwrap_or_else(|| match rng.random_range(0..10) {
        0 | 1 => Connotation::Positive,
        2 => Connotation::Negative,
        _ => Connotation::Neutral,
    });
    let pool = match conn {
        Connotation::Positive => POSITIVE,
        Connotation::Negative => NEGATIVE,
        Connotation::Neutral => NEUTRAL,
    };
    let (en, fr) = *pool.choose(rng).unwrap();
    let work = loop {
        let w = format!("{} {}", word(rng), word(rng));
        if used.insert(w.to_lowercase()) {
            break w;
        }
    };
    let year = rng.random_range(1950..2021).to_string();
    let place = *PLACES.choose(rng).unwrap();
    let fill = |t: &str| t.replace("{s}", subject).replace("{w}", &work).replace("{y}", &year).replace("{p}", place);
    Planted {
        en: fill(en),
        fr: fill(fr),
        conn,
    }
}

enum Slot {
    Shared(usize),
    Only,
}

/// Generates the fixture. `shared_paragraphs` paragraphs exist in both
/// languages; one extra English paragraph (with a positive fact) exists
/// only in English.
pub fn bio_fixture(seed_value: u64, shared_paragraphs: usize) -> BioFixture {
    let mut rng = seed::rng(seed::derive(seed_value, "bio-fixture"));
    let subject = format!("{} {}", FIRST.choose(&mut rng).unwrap(), LAST.choose(&mut rng).unwrap());
    let mut used = BTreeSet::new();
    let missing_at = shared_paragraphs / 2 + 1;

    let mut en_paras: Vec<Vec<(String, Connotation, Option<usize>)>> = Vec::new();
    let mut fr_paras: Vec<Vec<(String, Connotation, Option<usize>)>> = Vec::new();
    let mut pair_no = 0;
    for p in 0..shared_paragraphs {
        if p == missing_at {
            let mut para = Vec::new();
            for i in 0..5 {
                let c = (i == 1).then_some(Connotation::Positive).or(Some(Connotation::Neutral));
                let f = planted(&mut rng, &subject, &mut used, c);
                para.push((f.en, f.conn, None));
            }
            en_paras.push(para);
        }
        let n_shared = rng.random_range(6..=8);
        let n_en = rng.random_range(1..=3);
        let n_fr = rng.random_range(0..=2);
        let mut en_slots: Vec<Slot> = (0..n_shared).map(Slot::Shared).chain((0..n_en).map(|_| Slot::Only)).collect();
        let mut fr_slots: Vec<Slot> = (0..n_shared).map(Slot::Shared).chain((0..n_fr).map(|_| Slot::Only)).collect();
        shuffle_keep_shared_order(&mut rng, &mut en_slots);
        shuffle_keep_shared_order(&mut rng, &mut fr_slots);
        let shared: Vec<Planted> = (0..n_shared).map(|_| planted(&mut rng, &subject, &mut used, None)).collect();
        let base = pair_no;
        pair_no += n_shared;
        let mut build = |slots: &[Slot], en: bool| -> Vec<(String, Connotation, Option<usize>)> {
            slots
                .iter()
                .map(|s| match s {
                    Slot::Shared(i) => {
                        let f = &shared[*i];
                        (if en { f.en.clone() } else { f.fr.clone() }, f.conn, Some(base + i))
                    }
                    Slot::Only => {
                        let f = planted(&mut rng, &subject, &mut used, None);
                        (if en { f.en } else { f.fr }, f.conn, None)
                    }
                })
                .collect()
        };
        let e = build(&en_slots, true);
        let f = build(&fr_slots, false);
        en_paras.push(e);
        fr_paras.push(f);
    }

    let nationality = Some("Chilean".to_string());
    let make = |lang: &str, title: &str, paras: &[Vec<(String, Connotation, Option<usize>)>]| Article {
        language_code: lang.into(),
        title: title.into(),
        subject_name: subject.clone(),
        is_lgbt: Some(true),
        nationality: nationality.clone(),
        paragraphs: paras
            .iter()
            .enumerate()
            .map(|(id, p)| Paragraph {
                id,
                sentences: p.iter().map(|(s, _, _)| s.clone()).collect(),
            })
            .collect(),
    };
    let en = make("en", &subject, &en_paras);
    let fr = make("fr", &subject, &fr_paras);

    // Fact ids follow sentence order (one fact per sentence).
    let flat = |paras: &[Vec<(String, Connotation, Option<usize>)>]| -> Vec<(Connotation, Option<usize>)> {
        paras.iter().flatten().map(|(_, c, k)| (*c, *k)).collect()
    };
    let en_flat = flat(&en_paras);
    let fr_flat = flat(&fr_paras);
    let index = |v: &[(Connotation, Option<usize>)]| -> BTreeMap<usize, usize> {
        v.iter().enumerate().filter_map(|(id, (_, k))| k.map(|k| (k, id))).collect()
    };
    let en_of = index(&en_flat);
    let fr_of = index(&fr_flat);

    let en_fr = Direction::new("en", "fr");
    let fr_en = en_fr.reversed();
    let mut oracle = Vec::new();
    for (k, &e) in &en_of {
        let f = fr_of[k];
        oracle.push(OracleEntry { direction: en_fr.clone(), hypothesis: e, premise: f });
        oracle.push(OracleEntry { direction: fr_en.clone(), hypothesis: f, premise: e });
    }
    oracle.sort();

    let mut truth = BTreeMap::new();
    let mut annotations = BTreeMap::new();
    for (d, flat) in [(&en_fr, &en_flat), (&fr_en, &fr_flat)] {
        let t: BTreeMap<usize, bool> = flat.iter().enumerate().map(|(id, (_, k))| (id, k.is_some())).collect();
        let mut recs = Vec::new();
        for (&id, &shared) in &t {
            let a = if shared { AnnotationOption::Retrieved } else { AnnotationOption::Absent };
            recs.push(AnnotationRecord { fact_id: id, option: a, annotator_id: "A".into() });
        }
        for (&id, &shared) in &t {
            let b = match (shared, id % 9) {
                (true, 4) => AnnotationOption::PartlyRetrieved,
                (true, 7) => AnnotationOption::Absent,
                (true, _) => AnnotationOption::Retrieved,
                (false, 5) => AnnotationOption::NotRetrieved,
                (false, _) => AnnotationOption::Absent,
            };
            recs.push(AnnotationRecord { fact_id: id, option: b, annotator_id: "B".into() });
        }
        truth.insert(d.clone(), t);
        annotations.insert(d.clone(), recs);
    }

    let conns = |v: &[(Connotation, Option<usize>)]| v.iter().enumerate().map(|(i, (c, _))| (i, *c)).collect();
    let connotations = [("en".to_string(), conns(&en_flat)), ("fr".to_string(), conns(&fr_flat))].into_iter().collect();

    BioFixture {
        en,
        fr,
        oracle,
        cues: fixture_cues(),
        annotations,
        truth,
        connotations,
        missing_paragraph: missing_at,
    }
}

/// Shuffles `slots` while keeping the shared slots in increasing order.
fn shuffle_keep_shared_order(rng: &mut ChaCha8Rng, slots: &mut [Slot]) {
    use rand::seq::SliceRandom;
    slots.shuffle(rng);
    let mut shared: Vec<usize> = slots
        .iter()
        .filter_map(|s| match s {
            Slot::Shared(i) => Some(*i),
            Slot::Only => None,
        })
        .collect();
    shared.sort_unstable();
    let mut it = shared.into_iter();
    for s in slots.iter_mut() {
        if let Slot::Shared(i) = s {
            *i = it.next().unwrap();
        }
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize, skip_first: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    if skip_first {
        v[0] = 0.0;
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn mix(a: f64, common: &[f64], b: f64, own: &[f64]) -> Embedding {
    Embedding::new(common.iter().zip(own).map(|(c, o)| a * c + b * o).collect()).unwrap()
}

fn faced_from(lang: &str, paragraphs: Vec<Vec<Embedding>>) -> FactedArticle {
    let mut facts = Vec::new();
    let mut embs = Vec::new();
    for (p, vs) in paragraphs.into_iter().enumerate() {
        for e in vs {
            facts.push(Fact {
                fact_id: facts.len(),
                paragraph_id: p,
                sentence_index: None,
                text: format!("{lang} fact {}", facts.len()),
            });
            embs.push(e);
        }
    }
    let article = Article {
        language_code: lang.into(),
        title: "synthetic".into(),
        subject_name: "synthetic".into(),
        is_lgbt: None,
        nationality: None,
        paragraphs: (0..facts.last().map(|f| f.paragraph_id + 1).unwrap_or(0))
            .map(|id| Paragraph { id, sentences: vec!["x".into()] })
            .collect(),
    };
    FactedArticle::new(article, facts, embs).expect("synthetic article is valid")
}

/// Alignment fixture with one planted hub: a target vector close to every
/// fact. Source facts `0..20` each have one true counterpart.
#[derive(Debug, Clone)]
pub struct HubFixture {
    pub source: FactedArticle,
    pub target: FactedArticle,
    pub hub_fact_id: usize,
    /// True counterpart of each source fact in paragraph 0.
    pub counterpart: BTreeMap<usize, usize>,
}

pub const HUB_DIM: usize = 256;
pub const HUB_SOURCES: usize = 20;

/// Every vector is `a*c + b*r` with a shared direction `c` and an own
/// direction `r` orthogonal to it; the hub is `c` itself. Counterparts'
/// own directions correlate with `rho`.
pub fn hub_fixture(seed_value: u64) -> HubFixture {
    let (a, rho) = (0.8f64, 0.3f64);
    let b = (1.0 - a * a).sqrt();
    let mut rng = seed::rng(seed::derive(seed_value, "hub-fixture"));
    let mut c = vec![0.0; HUB_DIM];
    c[0] = 1.0;

    let mut src0 = Vec::new();
    let mut tgt0 = vec![Embedding::new(c.clone()).unwrap()];
    let mut counterpart = BTreeMap::new();
    for i in 0..HUB_SOURCES {
        let r = gaussian_unit(&mut rng, HUB_DIM, true);
        let q = gaussian_unit(&mut rng, HUB_DIM, true);
        let rt: Vec<f64> = r.iter().zip(&q).map(|(x, y)| rho * x + (1.0 - rho * rho).sqrt() * y).collect();
        src0.push(mix(a, &c, b, &r));
        tgt0.push(mix(a, &c, b, &rt));
        counterpart.insert(i, i + 1);
    }
    // Decoy paragraphs mirrored on both sides form the hubness background.
    let mut src = vec![src0];
    let mut tgt = vec![tgt0];
    for _ in 0..3 {
        let mut s = Vec::new();
        let mut t = Vec::new();
        for _ in 0..20 {
            let r = gaussian_unit(&mut rng, HUB_DIM, true);
            let noise = gaussian_unit(&mut rng, HUB_DIM, true);
            let rs: Vec<f64> = r.iter().zip(&noise).map(|(x, y)| x + 0.05 * y).collect();
            t.push(mix(a, &c, b, &r));
            s.push(mix(a, &c, b, &rs));
        }
        src.push(s);
        tgt.push(t);
    }
    HubFixture {
        source: faced_from("en", src),
        target: faced_from("fr", tgt),
        hub_fact_id: 0,
        counterpart,
    }
}

/// Random article pair: 1 to 8 paragraphs per side, 1 to 6 facts per
/// paragraph, Gaussian embeddings.
pub fn random_pair(seed_value: u64, dim: usize) -> (FactedArticle, FactedArticle) {
    let mut rng = seed::rng(seed::derive(seed_value, "random-pair"));
    let side = |rng: &mut ChaCha8Rng| -> Vec<Vec<Embedding>> {
        (0..rng.random_range(1..=8))
            .map(|_| {
                (0..rng.random_range(1..=6))
                    .map(|_| Embedding::new(gaussian_unit(rng, dim, false)).unwrap())
                    .collect()
            })
            .collect()
    };
    let s = side(&mut rng);
    let t = side(&mut rng);
    (faced_from("en", s), faced_from("fr", t))
}

/// Answers OpenAI-style embedding and chat requests deterministically:
/// embeddings are hashed bags of words, decomposition splits sentences,
/// connotation uses the fixture cues, and entailment holds when the
/// hypothesis and a premise share a four-digit number.
pub fn stub_response(body: &Value) -> Value {
    if let Some(input) = body.get("input").and_then(Value::as_array) {
        let emb = HashEmbedder::new(64, 0);
        let data: Vec<Value> = input
            .iter()
            .enumerate()
            .map(|(i, t)| json!({"index": i, "embedding": emb.embed_one(t.as_str().unwrap_or("")).values()}))
            .collect();
        return json!({ "data": data });
    }
    let prompt = body
        .get("messages")
        .and_then(Value::as_array)
        .and_then(|m| m.last())
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .unwrap_or("");
    let answer = if let Some(content) = prompt.rsplit("Paragraph:\n").next().filter(|_| prompt.contains("Paragraph:\n")) {
        let facts: Vec<String> = content
            .split_inclusive(". ")
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        serde_json::to_string(&facts).unwrap()
    } else if prompt.contains("Premise 1:") {
        let (src, tgt) = prompt.split_once("Premise 1:").unwrap();
        let last_line = |block: &str| {
            block
                .lines()
                .rfind(|l| l.split_once(". ").is_some_and(|(n, _)| n.trim().parse::<usize>().is_ok()))
                .unwrap_or("")
                .to_string()
        };
        let hyp = last_line(src);
        let premises: Vec<&str> = tgt.split("Premise ").collect();
        let years = |s: &str| -> BTreeSet<String> {
            s.split(|c: char| !c.is_ascii_digit())
                .filter(|w| w.len() == 4)
                .map(str::to_string)
                .collect()
        };
        let hy = years(&hyp);
        let hits: Vec<usize> = premises
            .iter()
            .enumerate()
            .filter(|(_, p)| !hy.is_empty() && !years(&last_line(p)).is_disjoint(&hy))
            .map(|(i, _)| i + 1)
            .collect();
        json!({"rationale": "stub", "entailed": !hits.is_empty(), "premises": hits}).to_string()
    } else {
        let cues = fixture_cues();
        let text = prompt.to_lowercase();
        let has = |v: &[String]| v.iter().any(|c| text.contains(c.as_str()));
        let label = match (has(&cues.positive), has(&cues.negative)) {
            (true, false) => "positive",
            (false, true) => "negative",
            _ => "neutral",
        };
        json!({"rationale": "stub", "label": label}).to_string()
    };
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": answer}}]})
}
