//! Writes the mini bilingual fixture used by the tests.
//!
//! Usage: cargo run -p infogap-core --example make_fixture -- <dir>

use std::path::PathBuf;

use infogap::corpus::save_article;
use infogap::eval::write_annotations;
use infogap::io::{write_atomic, write_json, write_jsonl};
use infogap::synthetic::bio_fixture;

fn main() -> infogap::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures/mini".into())
        .into();
    let f = bio_fixture(7, 11);
    save_article(&f.en, &dir.join("en.json"))?;
    save_article(&f.fr, &dir.join("fr.json"))?;
    write_jsonl(&dir.join("oracle.jsonl"), &f.oracle)?;
    write_json(&dir.join("cues.json"), &f.cues)?;
    for (d, recs) in &f.annotations {
        write_atomic(
            &dir.join(format!("annotations_{}.tsv", d.slug())),
            write_annotations(recs).as_bytes(),
        )?;
    }
    println!(
        "wrote {} (en {} paragraphs, fr {} paragraphs)",
        dir.display(),
        f.en.paragraphs.len(),
        f.fr.paragraphs.len()
    );
    Ok(())
}
