use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use infogap::io;
use infogap::pipeline::{BackendConfig, HttpSetup, MockSetup};
use infogap::providers::cache::ResponseCache;
use infogap::providers::http::{CachedEndpoint, EndpointOptions, UreqTransport};
use infogap::providers::prompt::PromptTemplates;
use infogap::providers::Providers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,

    /// Mock embedding dimension.
    #[arg(long, default_value_t = 256)]
    pub embed_dim: usize,
    /// Mock embedding hash seed.
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
    /// Mock entailment table (JSONL of direction/hypothesis/premise).
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Mock connotation cue lists (JSON).
    #[arg(long)]
    pub cues: Option<PathBuf>,

    #[arg(long, default_value = "https://api.openai.com/v1/embeddings")]
    pub embed_endpoint: String,
    #[arg(long, default_value = "text-embedding-3-large")]
    pub embed_model: String,
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    pub judge_endpoint: String,
    #[arg(long, default_value = "gpt-4o")]
    pub judge_model: String,
    #[arg(long, env = "INFOGAP_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Response cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Serve every request from the cache; a miss is an error.
    #[arg(long)]
    pub offline: bool,
    /// Directory of prompt templates overriding the built-ins.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

pub struct Backend {
    pub providers: Providers,
    pub config: BackendConfig,
    pub endpoint: Option<Arc<CachedEndpoint>>,
}

impl Backend {
    pub fn log_calls(&self) {
        if let Some(e) = &self.endpoint {
            log::info!("network calls: {}", e.network_calls());
        }
    }
}

impl BackendArgs {
    pub fn build(&self) -> Result<Backend> {
        match self.backend {
            BackendKind::Mock => {
                if self.offline || self.cache_dir.is_some() {
                    log::warn!("--offline and --cache-dir have no effect with the mock backend");
                }
                let setup = MockSetup {
                    embed_dim: self.embed_dim,
                    embed_seed: self.embed_seed,
                    oracle: match &self.oracle {
                        Some(p) => Some(io::read_jsonl(p).with_context(|| format!("reading oracle {}", p.display()))?),
                        None => None,
                    },
                    cues: match &self.cues {
                        Some(p) => Some(io::read_json(p).with_context(|| format!("reading cues {}", p.display()))?),
                        None => None,
                    },
                };
                Ok(Backend {
                    providers: setup.providers(),
                    config: setup.backend_config(),
                    endpoint: None,
                })
            }
            BackendKind::Http => {
                if self.offline && self.cache_dir.is_none() {
                    bail!("--offline needs --cache-dir");
                }
                let templates = match &self.templates {
                    Some(dir) => PromptTemplates::load_dir(dir)?,
                    None => PromptTemplates::default(),
                };
                let setup = HttpSetup {
                    embed_endpoint: self.embed_endpoint.clone(),
                    embed_model: self.embed_model.clone(),
                    judge_endpoint: self.judge_endpoint.clone(),
                    judge_model: self.judge_model.clone(),
                    templates,
                    transport: Arc::new(UreqTransport::new(Duration::from_secs(self.timeout_secs))),
                    options: EndpointOptions {
                        cache: self.cache_dir.as_ref().map(ResponseCache::new),
                        offline: self.offline,
                        api_key: self.api_key.clone(),
                        max_in_flight: self.max_in_flight,
                        ..EndpointOptions::default()
                    },
                };
                let (providers, endpoint) = setup.build();
                Ok(Backend {
                    providers,
                    config: setup.backend_config(),
                    endpoint: Some(endpoint),
                })
            }
        }
    }
}
