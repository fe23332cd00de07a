//! Prompt templates with `{name}` placeholders.
//!
//! Built-in templates ship in `templates/`; a directory with files of the
//! same names overrides them. Entailment templates are looked up per
//! direction: `entailment_<src>-<tgt>.txt`, then `entailment_<src>-xx.txt`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::Direction;
use crate::error::{Error, Result};

const BUILTIN: &[(&str, &str)] = &[
    ("decompose.txt", include_str!("../../templates/decompose.txt")),
    ("entailment_en-xx.txt", include_str!("../../templates/entailment_en-xx.txt")),
    ("entailment_fr-en.txt", include_str!("../../templates/entailment_fr-en.txt")),
    ("entailment_ru-en.txt", include_str!("../../templates/entailment_ru-en.txt")),
    ("connotation.txt", include_str!("../../templates/connotation.txt")),
];

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    files: BTreeMap<String, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            files: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl PromptTemplates {
    /// Built-ins overlaid with every `*.txt` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut t = PromptTemplates::default();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            let text = crate::io::read_to_string(&path)?;
            t.files.insert(name, text);
        }
        t.check()?;
        Ok(t)
    }

    /// SHA-256 over every template name and text.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (name, text) in &self.files {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(text.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    pub fn insert(&mut self, name: &str, text: &str) {
        self.files.insert(name.to_string(), text.to_string());
    }

    fn check(&self) -> Result<()> {
        for (name, text) in &self.files {
            let required: &[&str] = if name.starts_with("decompose") {
                &["content"]
            } else if name.starts_with("entailment") {
                &["src_facts", "tgt_facts"]
            } else if name.starts_with("connotation") {
                &["content"]
            } else {
                &[]
            };
            for p in required {
                if !text.contains(&format!("{{{p}}}")) {
                    return Err(Error::Validation(format!(
                        "template {name} lacks the {{{p}}} placeholder"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn decompose(&self, language: &str) -> Result<&str> {
        self.lookup(&[format!("decompose_{language}.txt"), "decompose.txt".into()])
    }

    pub fn entailment(&self, direction: &Direction) -> Result<&str> {
        self.lookup(&[
            format!("entailment_{}-{}.txt", direction.source, direction.target),
            format!("entailment_{}-xx.txt", direction.source),
        ])
    }

    pub fn connotation(&self, language: &str) -> Result<&str> {
        self.lookup(&[format!("connotation_{language}.txt"), "connotation.txt".into()])
    }

    fn lookup(&self, names: &[String]) -> Result<&str> {
        names
            .iter()
            .find_map(|n| self.files.get(n))
            .map(String::as_str)
            .ok_or_else(|| Error::InvalidArgument(format!("no prompt template among {names:?}")))
    }
}

/// Substitutes `{name}` placeholders. Braces that do not name a supplied
/// variable are left alone, so templates may contain literal JSON.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}
