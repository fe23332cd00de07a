//! Content-addressed response cache.
//!
//! Layout: `<root>/<backend>/<first two hex digits>/<sha256>.json`. The key
//! is the SHA-256 of the canonical request JSON (object keys sorted, text
//! NFC-normalized). Entries are written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::corpus::nfc;
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRequest {
    pub backend: String,
    pub model: String,
    pub payload: Value,
}

impl ProviderRequest {
    pub fn new(backend: impl Into<String>, model: impl Into<String>, payload: Value) -> Self {
        ProviderRequest {
            backend: backend.into(),
            model: model.into(),
            payload,
        }
    }

    pub fn canonical_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("backend".into(), Value::String(self.backend.clone()));
        m.insert("model".into(), Value::String(self.model.clone()));
        m.insert("payload".into(), self.payload.clone());
        canonicalize(&Value::Object(m))
    }

    pub fn canonical_json(&self) -> String {
        write_canonical(&self.canonical_value())
    }

    pub fn cache_key(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// NFC-normalizes every string in `value`.
fn canonicalize(value: &Value) -> Value {
    match value {
        Value::String(s) => Value::String(nfc(s)),
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (nfc(k), canonicalize(v))).collect()),
        other => other.clone(),
    }
}

/// Serializes with object keys in sorted order regardless of map backing.
fn write_canonical(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push(':');
                write_value(&m[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(v, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, request: &ProviderRequest) -> PathBuf {
        let key = request.cache_key();
        self.root
            .join(sanitize(&request.backend))
            .join(&key[..2])
            .join(format!("{key}.json"))
    }

    pub fn get(&self, request: &ProviderRequest) -> Result<Option<Value>> {
        let path = self.entry_path(request);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry: Value = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        match entry.get("response") {
            Some(v) => Ok(Some(v.clone())),
            None => Err(Error::Schema {
                context: path.display().to_string(),
                message: "cache entry without response".into(),
            }),
        }
    }

    pub fn put(&self, request: &ProviderRequest, response: &Value) -> Result<()> {
        let mut m = Map::new();
        m.insert("request".into(), request.canonical_value());
        m.insert("response".into(), response.clone());
        let text = write_canonical(&Value::Object(m));
        write_atomic(&self.entry_path(request), text.as_bytes())
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
