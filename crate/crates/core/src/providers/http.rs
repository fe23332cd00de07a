//! Live HTTP backends.
//!
//! The judge endpoint is chat-style (`{"model", "messages"}` in,
//! `choices[0].message.content` out) and the embedding endpoint takes
//! `{"model", "input": [..]}` and returns `data[i].embedding`. Every call
//! goes through [`CachedEndpoint`], which consults the response cache
//! first, refuses to touch the network in offline mode, bounds in-flight
//! requests, and retries transient failures.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::cache::{ProviderRequest, ResponseCache};
use super::prompt::{render, PromptTemplates};
use super::{ConnotationJudge, Decomposer, Embedder, EntailmentJudge, Verdict};
use crate::connotation::{Connotation, ConnotationLabel};
use crate::corpus::Paragraph;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::matching::EntailmentQuery;

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    Transient(String),
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, api_key: Option<&str>, body: &Value) -> std::result::Result<Value, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, api_key: Option<&str>, body: &Value) -> std::result::Result<Value, TransportError> {
        let mut req = self.agent.post(url);
        if let Some(key) = api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound => TransportError::Transient(e.to_string()),
            other => TransportError::Fatal(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            return Err(TransportError::Fatal(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("invalid JSON body: {e}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct EndpointOptions {
    pub cache: Option<ResponseCache>,
    pub offline: bool,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for EndpointOptions {
    fn default() -> Self {
        EndpointOptions {
            cache: None,
            offline: false,
            api_key: None,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

/// Cache-first, retrying, concurrency-bounded access to a transport.
pub struct CachedEndpoint {
    transport: Arc<dyn Transport>,
    options: EndpointOptions,
    limiter: Limiter,
    network_calls: AtomicU64,
}

impl CachedEndpoint {
    pub fn new(transport: Arc<dyn Transport>, options: EndpointOptions) -> Self {
        let limiter = Limiter::new(options.max_in_flight);
        CachedEndpoint {
            transport,
            options,
            limiter,
            network_calls: AtomicU64::new(0),
        }
    }

    /// Number of requests handed to the transport (retries included).
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cached(&self, request: &ProviderRequest) -> Result<Option<Value>> {
        match &self.options.cache {
            Some(c) => c.get(request),
            None => Ok(None),
        }
    }

    fn store(&self, request: &ProviderRequest, response: &Value) -> Result<()> {
        match &self.options.cache {
            Some(c) => c.put(request, response),
            None => Ok(()),
        }
    }

    fn offline_miss(&self, request: &ProviderRequest) -> Error {
        Error::OfflineCacheMiss {
            backend: request.backend.clone(),
            key: request.cache_key(),
        }
    }

    fn post(&self, backend: &str, url: &str, body: &Value) -> Result<Value> {
        let _permit = self.limiter.acquire();
        let retry = self.options.retry;
        let mut last = String::new();
        for attempt in 0..retry.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(retry.base_delay * 2u32.pow(attempt - 1));
            }
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.post_json(url, self.options.api_key.as_deref(), body) {
                Ok(v) => return Ok(v),
                Err(TransportError::Transient(msg)) => {
                    log::warn!("{backend}: transient failure (attempt {}): {msg}", attempt + 1);
                    last = msg;
                }
                Err(TransportError::Fatal(msg)) => {
                    return Err(Error::Backend {
                        backend: backend.to_string(),
                        message: msg,
                    })
                }
            }
        }
        Err(Error::Backend {
            backend: backend.to_string(),
            message: format!("gave up after {} attempts: {last}", retry.max_attempts),
        })
    }

    /// Returns the cached response for `request`, or posts `body` to `url`,
    /// extracts the response with `extract`, caches it, and returns it.
    pub fn fetch(
        &self,
        request: &ProviderRequest,
        url: &str,
        body: &Value,
        extract: impl Fn(&Value) -> Result<Value>,
    ) -> Result<Value> {
        if let Some(hit) = self.cached(request)? {
            return Ok(hit);
        }
        if self.options.offline {
            return Err(self.offline_miss(request));
        }
        let raw = self.post(&request.backend, url, body)?;
        let value = extract(&raw)?;
        self.store(request, &value)?;
        Ok(value)
    }
}

pub struct HttpEmbedder {
    endpoint: Arc<CachedEndpoint>,
    url: String,
    model: String,
    batch_size: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: Arc<CachedEndpoint>, url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpEmbedder {
            endpoint,
            url: url.into(),
            model: model.into(),
            batch_size: 64,
        }
    }

    fn request(&self, text: &str, language: &str) -> ProviderRequest {
        ProviderRequest::new("embedding", &self.model, json!({"text": text, "language": language}))
    }
}

fn vector_from(value: &Value, backend: &str) -> Result<Embedding> {
    let values = value
        .as_array()
        .ok_or_else(|| Error::ResponseParse {
            backend: backend.into(),
            message: "embedding is not an array".into(),
            raw: value.to_string(),
        })?
        .iter()
        .map(|x| {
            x.as_f64().ok_or_else(|| Error::ResponseParse {
                backend: backend.into(),
                message: "embedding has a non-numeric entry".into(),
                raw: value.to_string(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Embedding::new(values)
}

impl Embedder for HttpEmbedder {
    fn tag(&self) -> String {
        format!("http-embedding:{}", self.model)
    }

    fn embed(&self, texts: &[String], language: &str) -> Result<Vec<Embedding>> {
        let tag = self.tag();
        let requests: Vec<ProviderRequest> = texts.iter().map(|t| self.request(t, language)).collect();
        let mut out: Vec<Option<Value>> = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for (i, r) in requests.iter().enumerate() {
            let hit = self.endpoint.cached(r)?;
            if hit.is_none() {
                missing.push(i);
            }
            out.push(hit);
        }
        if let (true, Some(&first)) = (self.endpoint.options.offline, missing.first()) {
            return Err(self.endpoint.offline_miss(&requests[first]));
        }
        for chunk in missing.chunks(self.batch_size) {
            let inputs: Vec<&str> = chunk.iter().map(|&i| texts[i].as_str()).collect();
            let body = json!({"model": self.model, "input": inputs});
            let raw = self.endpoint.post("embedding", &self.url, &body)?;
            let data = raw.get("data").and_then(Value::as_array).ok_or_else(|| Error::ResponseParse {
                backend: tag.clone(),
                message: "missing data array".into(),
                raw: raw.to_string(),
            })?;
            if data.len() != chunk.len() {
                return Err(Error::ResponseParse {
                    backend: tag.clone(),
                    message: format!("expected {} embeddings, got {}", chunk.len(), data.len()),
                    raw: raw.to_string(),
                });
            }
            for (&i, item) in chunk.iter().zip(data) {
                let v = item.get("embedding").cloned().unwrap_or(Value::Null);
                vector_from(&v, &tag)?;
                self.endpoint.store(&requests[i], &v)?;
                out[i] = Some(v);
            }
        }
        out.into_iter()
            .map(|v| vector_from(&v.expect("filled"), &tag))
            .collect()
    }
}

/// Cached chat completions against the judge endpoint.
pub struct ChatClient {
    endpoint: Arc<CachedEndpoint>,
    url: String,
    model: String,
}

impl ChatClient {
    pub fn new(endpoint: Arc<CachedEndpoint>, url: impl Into<String>, model: impl Into<String>) -> Self {
        ChatClient {
            endpoint,
            url: url.into(),
            model: model.into(),
        }
    }

    pub fn tag(&self) -> String {
        format!("http-chat:{}", self.model)
    }

    /// `task` names the cache namespace (`decompose`, `entailment`, ...).
    pub fn complete(&self, task: &str, prompt: &str) -> Result<String> {
        let request = ProviderRequest::new(task, &self.model, json!({"prompt": prompt}));
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let tag = self.tag();
        let value = self.endpoint.fetch(&request, &self.url, &body, |raw| {
            raw.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(|s| json!({"text": s}))
                .ok_or_else(|| Error::ResponseParse {
                    backend: tag.clone(),
                    message: "missing choices[0].message.content".into(),
                    raw: raw.to_string(),
                })
        })?;
        value
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Schema {
                context: format!("cache entry {}", request.cache_key()),
                message: "chat response without text".into(),
            })
    }
}

pub struct LlmDecomposer {
    chat: Arc<ChatClient>,
    templates: Arc<PromptTemplates>,
}

impl LlmDecomposer {
    pub fn new(chat: Arc<ChatClient>, templates: Arc<PromptTemplates>) -> Self {
        LlmDecomposer { chat, templates }
    }
}

impl Decomposer for LlmDecomposer {
    fn tag(&self) -> String {
        self.chat.tag()
    }

    fn decompose(&self, paragraph: &Paragraph, subject_name: &str, language: &str) -> Result<Vec<String>> {
        let content = paragraph
            .sentences
            .iter()
            .filter(|s| !s.trim().is_empty())
            .cloned()
            .collect::<Vec<_>>()
            .join(" ");
        let prompt = render(
            self.templates.decompose(language)?,
            &[("content", &content), ("person_name", subject_name)],
        );
        let raw = self.chat.complete("decompose", &prompt)?;
        let facts = parse_string_list(&raw).map_err(|message| Error::ResponseParse {
            backend: self.tag(),
            message,
            raw: raw.clone(),
        })?;
        let facts: Vec<String> = facts.into_iter().filter(|f| !f.trim().is_empty()).collect();
        if facts.is_empty() {
            return Err(Error::ResponseParse {
                backend: self.tag(),
                message: "empty fact list".into(),
                raw,
            });
        }
        Ok(facts)
    }
}

pub struct LlmEntailmentJudge {
    chat: Arc<ChatClient>,
    templates: Arc<PromptTemplates>,
}

impl LlmEntailmentJudge {
    pub fn new(chat: Arc<ChatClient>, templates: Arc<PromptTemplates>) -> Self {
        LlmEntailmentJudge { chat, templates }
    }
}

fn numbered(lines: &[String]) -> String {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}. {l}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

impl EntailmentJudge for LlmEntailmentJudge {
    fn tag(&self) -> String {
        self.chat.tag()
    }

    fn judge(&self, query: &EntailmentQuery) -> Result<Verdict> {
        let src = numbered(&query.hypothesis_window);
        let tgt = query
            .premises
            .iter()
            .enumerate()
            .map(|(i, p)| format!("Premise {}:\n{}", i + 1, numbered(&p.facts)))
            .collect::<Vec<_>>()
            .join("\n\n");
        let prompt = render(
            self.templates.entailment(&query.direction)?,
            &[("src_facts", &src), ("tgt_facts", &tgt), ("person_name", &query.subject_name)],
        );
        let raw = self.chat.complete("entailment", &prompt)?;
        let parsed = parse_entailment(&raw).map_err(|message| Error::ResponseParse {
            backend: self.tag(),
            message,
            raw: raw.clone(),
        })?;
        let supporting = parsed
            .premises
            .iter()
            .filter_map(|&n| n.checked_sub(1).and_then(|i| query.premises.get(i)))
            .map(|p| p.target_fact_id)
            .collect();
        Ok(Verdict {
            entailed: parsed.entailed,
            supporting,
            rationale: parsed.rationale,
            backend_tag: self.tag(),
        })
    }
}

pub struct LlmConnotationJudge {
    chat: Arc<ChatClient>,
    templates: Arc<PromptTemplates>,
}

impl LlmConnotationJudge {
    pub fn new(chat: Arc<ChatClient>, templates: Arc<PromptTemplates>) -> Self {
        LlmConnotationJudge { chat, templates }
    }
}

impl ConnotationJudge for LlmConnotationJudge {
    fn tag(&self) -> String {
        self.chat.tag()
    }

    fn judge_connotation(&self, window: &[String], subject_name: &str, language: &str) -> Result<ConnotationLabel> {
        if window.is_empty() {
            return Err(Error::InvalidArgument("empty connotation window".into()));
        }
        let content = window.join(" ");
        let prompt = render(
            self.templates.connotation(language)?,
            &[("content", &content), ("person_name", subject_name)],
        );
        let raw = self.chat.complete("connotation", &prompt)?;
        parse_connotation(&raw).map_err(|message| Error::ResponseParse {
            backend: self.tag(),
            message,
            raw,
        })
    }
}

fn json_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str::<Value>(&raw[start..=end]) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

/// Parses a JSON or Python-style list of strings, possibly surrounded by
/// other text (e.g. a fenced code block).
pub fn parse_string_list(raw: &str) -> std::result::Result<Vec<String>, String> {
    let start = raw.find('[').ok_or("no list in response")?;
    let end = raw.rfind(']').ok_or("unterminated list in response")?;
    if end < start {
        return Err("unterminated list in response".into());
    }
    let slice = &raw[start..=end];
    if let Ok(v) = serde_json::from_str::<Vec<String>>(slice) {
        return Ok(v);
    }
    parse_quoted_list(slice)
}

fn parse_quoted_list(slice: &str) -> std::result::Result<Vec<String>, String> {
    let mut chars = slice.chars().peekable();
    let mut items = Vec::new();
    if chars.next() != Some('[') {
        return Err("list must start with '['".into());
    }
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            Some(']') if items.is_empty() => return Ok(items),
            Some(q @ ('\'' | '"')) => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('\\') => match chars.next() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c) => s.push(c),
                            None => return Err("dangling escape".into()),
                        },
                        Some(c) if c == q => break,
                        Some(c) => s.push(c),
                    }
                }
                items.push(s);
            }
            other => return Err(format!("expected a quoted string, found {other:?}")),
        }
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            Some(',') => {
                while chars.peek().is_some_and(|c| c.is_whitespace()) {
                    chars.next();
                }
                if chars.peek() == Some(&']') {
                    return Ok(items);
                }
            }
            Some(']') => return Ok(items),
            other => return Err(format!("expected ',' or ']', found {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEntailment {
    pub entailed: bool,
    /// 1-based premise numbers.
    pub premises: Vec<usize>,
    pub rationale: Option<String>,
}

fn as_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_lowercase().as_str() {
            "true" | "yes" | "entailed" => Some(true),
            "false" | "no" | "not entailed" | "not_entailed" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

pub fn parse_entailment(raw: &str) -> std::result::Result<ParsedEntailment, String> {
    let obj = json_object(raw).ok_or("no JSON object in response")?;
    let entailed = obj
        .get("entailed")
        .or_else(|| obj.get("label"))
        .and_then(as_bool)
        .ok_or("missing or unrecognized 'entailed' field")?;
    let premises = match obj.get("premises") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_u64().map(|n| n as usize).ok_or("premise numbers must be integers"))
            .collect::<std::result::Result<_, _>>()?,
        Some(_) => return Err("'premises' must be a list".into()),
    };
    let rationale = obj.get("rationale").and_then(Value::as_str).map(str::to_string);
    Ok(ParsedEntailment {
        entailed,
        premises,
        rationale,
    })
}

pub fn parse_connotation(raw: &str) -> std::result::Result<ConnotationLabel, String> {
    let (label, rationale) = match json_object(raw) {
        Some(obj) => (
            obj.get("label")
                .and_then(Value::as_str)
                .ok_or("missing 'label' field")?
                .to_string(),
            obj.get("rationale").and_then(Value::as_str).map(str::to_string),
        ),
        None => (raw.trim().to_string(), None),
    };
    let value: Connotation = label.parse().map_err(|_| format!("label {label:?} is not positive, neutral, or negative"))?;
    Ok(ConnotationLabel { value, rationale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::PremiseWindow;
    use std::sync::atomic::AtomicUsize;

    struct Scripted {
        replies: Mutex<Vec<std::result::Result<Value, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: Vec<std::result::Result<Value, TransportError>>) -> Arc<Self> {
            Arc::new(Scripted {
                replies: Mutex::new(replies.into_iter().rev().collect()),
                calls: AtomicUsize::new(0),
            })
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, _: &str, _: Option<&str>, _: &Value) -> std::result::Result<Value, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().pop().unwrap_or(Err(TransportError::Fatal("no more replies".into())))
        }
    }

    fn chat_reply(text: &str) -> std::result::Result<Value, TransportError> {
        Ok(json!({"choices": [{"message": {"content": text}}]}))
    }

    fn options(cache: Option<ResponseCache>, offline: bool) -> EndpointOptions {
        EndpointOptions {
            cache,
            offline,
            retry: RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::ZERO,
            },
            ..EndpointOptions::default()
        }
    }

    fn paragraph() -> Paragraph {
        Paragraph {
            id: 4,
            sentences: vec!["Ada wrote notes.".into(), "She died in 1852.".into()],
        }
    }

    fn decomposer(t: Arc<Scripted>, cache: Option<ResponseCache>, offline: bool) -> LlmDecomposer {
        let ep = Arc::new(CachedEndpoint::new(t, options(cache, offline)));
        LlmDecomposer::new(Arc::new(ChatClient::new(ep, "http://x", "m")), Arc::new(PromptTemplates::default()))
    }

    #[test]
    fn decomposition_parse_contract() {
        let t = Scripted::new(vec![chat_reply(r#"["f1","f2"]"#)]);
        assert_eq!(decomposer(t, None, false).decompose(&paragraph(), "Ada", "en").unwrap(), vec!["f1", "f2"]);

        let t = Scripted::new(vec![chat_reply("Ada wrote some notes and then died.")]);
        match decomposer(t, None, false).decompose(&paragraph(), "Ada", "en") {
            Err(Error::ResponseParse { raw, .. }) => assert_eq!(raw, "Ada wrote some notes and then died."),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn python_style_lists() {
        assert_eq!(
            parse_string_list("```python\n['It\\'s one', \"two\",]\n```").unwrap(),
            vec!["It's one", "two"]
        );
        assert_eq!(parse_string_list("[]").unwrap(), Vec::<String>::new());
        assert!(parse_string_list("['a' 'b']").is_err());
    }

    #[test]
    fn cache_replay_needs_no_network() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let t = Scripted::new(vec![chat_reply(r#"["f1"]"#)]);
        let d = decomposer(t.clone(), Some(cache.clone()), false);
        let first = d.decompose(&paragraph(), "Ada", "en").unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);

        let t2 = Scripted::new(vec![]);
        let d2 = decomposer(t2.clone(), Some(cache), true);
        assert_eq!(d2.decompose(&paragraph(), "Ada", "en").unwrap(), first);
        assert_eq!(t2.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn offline_cold_cache_fails_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![chat_reply("[]")]);
        let d = decomposer(t.clone(), Some(ResponseCache::new(dir.path())), true);
        assert!(matches!(d.decompose(&paragraph(), "Ada", "en"), Err(Error::OfflineCacheMiss { .. })));
        assert_eq!(t.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn transient_failures_are_retried_three_times() {
        let t = Scripted::new(vec![
            Err(TransportError::Transient("503".into())),
            Err(TransportError::Transient("timeout".into())),
            chat_reply(r#"["ok"]"#),
        ]);
        assert_eq!(decomposer(t.clone(), None, false).decompose(&paragraph(), "A", "en").unwrap(), vec!["ok"]);
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);

        let t = Scripted::new(vec![Err(TransportError::Transient("x".into())); 4]);
        assert!(matches!(decomposer(t.clone(), None, false).decompose(&paragraph(), "A", "en"), Err(Error::Backend { .. })));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);

        let t = Scripted::new(vec![Err(TransportError::Fatal("401".into())), chat_reply("[\"x\"]")]);
        assert!(decomposer(t.clone(), None, false).decompose(&paragraph(), "A", "en").is_err());
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn embedding_batches_only_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let t = Scripted::new(vec![
            Ok(json!({"data": [{"embedding": [1.0, 0.0]}, {"embedding": [0.0, 2.0]}]})),
            Ok(json!({"data": [{"embedding": [3.0, 4.0]}]})),
        ]);
        let ep = Arc::new(CachedEndpoint::new(t.clone(), options(Some(cache), false)));
        let e = HttpEmbedder::new(ep.clone(), "http://e", "m");
        let v = e.embed(&["a".into(), "b".into()], "en").unwrap();
        assert_eq!(v[1].values(), &[0.0, 1.0]);
        let v = e.embed(&["b".into(), "c".into(), "a".into()], "en").unwrap();
        assert_eq!(v[1].values(), &[0.6, 0.8]);
        assert_eq!(v[2].values(), &[1.0, 0.0]);
        assert_eq!(ep.network_calls(), 2);
    }

    #[test]
    fn entailment_judge_maps_premise_numbers() {
        let t = Scripted::new(vec![chat_reply(
            "Sure. {\"rationale\": \"premise 2 says so\", \"entailed\": true, \"premises\": [2]}",
        )]);
        let ep = Arc::new(CachedEndpoint::new(t, options(None, false)));
        let j = LlmEntailmentJudge::new(Arc::new(ChatClient::new(ep, "u", "m")), Arc::new(PromptTemplates::default()));
        let q = EntailmentQuery {
            hypothesis_fact_id: 1,
            hypothesis_window: vec!["a".into(), "b".into()],
            premises: vec![
                PremiseWindow { target_fact_id: 10, facts: vec!["x".into()] },
                PremiseWindow { target_fact_id: 11, facts: vec!["y".into()] },
            ],
            direction: "fr->en".parse().unwrap(),
            subject_name: "S".into(),
        };
        let v = j.judge(&q).unwrap();
        assert!(v.entailed);
        assert_eq!(v.supporting, vec![11]);
        assert_eq!(v.rationale.as_deref(), Some("premise 2 says so"));
    }

    #[test]
    fn entailment_parse_errors() {
        assert!(parse_entailment("I think so").is_err());
        assert!(parse_entailment(r#"{"entailed": "maybe"}"#).is_err());
        assert!(!parse_entailment(r#"{"label": "no"}"#).unwrap().entailed);
    }

    #[test]
    fn connotation_parse() {
        let l = parse_connotation(r#"{"rationale": "praise", "label": "Positive"}"#).unwrap();
        assert_eq!(l.value, Connotation::Positive);
        assert_eq!(l.rationale.as_deref(), Some("praise"));
        assert_eq!(parse_connotation("neutral").unwrap().value, Connotation::Neutral);
        assert!(parse_connotation(r#"{"label": "mixed"}"#).is_err());
        assert!(parse_connotation("mixed").is_err());
    }

    #[test]
    fn limiter_bounds_in_flight() {
        let limiter = Arc::new(Limiter::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (l, a, p) = (limiter.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _g = l.acquire();
                    let now = a.fetch_add(1, Ordering::SeqCst) + 1;
                    p.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    a.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
