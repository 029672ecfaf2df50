//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! [graph]
//! delta_ct = 0.5
//! delta_cc = 0.8
//! cap_c2t = 15
//! cap_c2c2t = 5
//!
//! [calibration]
//! threshold = 0.5
//!
//! [generation]
//! icl_n = 3
//! rag_n = 3
//! max_tokens = 256
//!
//! [encoder]
//! backend = "reference"   # or "remote" with url, token, dim, max_in_flight
//! dim = 256
//!
//! [completion]
//! backend = "mock"        # or "remote" with url, token, max_in_flight
//! script = "mock.jsonl"
//!
//! [knowledge]
//! samples = "samples.jsonl"
//! corpus = "corpus.jsonl"
//! search_url = "http://localhost:9000/search"
//!
//! [pipeline]
//! parallelism = 4
//! chunk_size = 256
//! timings = false
//! ```
//!
//! Relative paths resolve against the directory of the config file. The
//! environment variables `GRAPHTAG_ENCODER_URL`, `GRAPHTAG_ENCODER_TOKEN`,
//! `GRAPHTAG_COMPLETION_URL`, `GRAPHTAG_COMPLETION_TOKEN`,
//! `GRAPHTAG_SEARCH_URL` and `GRAPHTAG_SEARCH_TOKEN` override the file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationConfig;
use crate::encoder::{Encoder, HashingEncoder, RemoteEncoder};
use crate::error::{Error, Result};
use crate::genkit::{
    CompletionClient, HttpSearchClient, RemoteCompletionClient, ScriptedClient, SearchClient,
    DEFAULT_MAX_TOKENS, DEFAULT_PREAMBLE, DEFAULT_SEGMENT_MAX_CHARS,
};
use crate::graph::GraphConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// In-context samples retrieved per content.
    pub icl_n: usize,
    /// Corpus segments retrieved per content.
    pub rag_n: usize,
    pub max_tokens: u32,
    pub preamble: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            icl_n: 3,
            rag_n: 3,
            max_tokens: DEFAULT_MAX_TOKENS,
            preamble: DEFAULT_PREAMBLE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderConfig {
    Reference {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        #[serde(default)]
        url: String,
        #[serde(default)]
        token: Option<String>,
        dim: usize,
        #[serde(default = "default_encoder_in_flight")]
        max_in_flight: usize,
    },
}

fn default_dim() -> usize {
    HashingEncoder::DEFAULT_DIM
}

fn default_encoder_in_flight() -> usize {
    RemoteEncoder::DEFAULT_MAX_IN_FLIGHT
}

fn default_completion_in_flight() -> usize {
    RemoteCompletionClient::DEFAULT_MAX_IN_FLIGHT
}

fn yes() -> bool {
    true
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::Reference { dim: default_dim() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompletionConfig {
    /// Scripted responses from a rule file.
    Mock {
        script: PathBuf,
        #[serde(default = "yes")]
        token_scores: bool,
    },
    Remote {
        #[serde(default)]
        url: String,
        #[serde(default)]
        token: Option<String>,
        #[serde(default = "default_completion_in_flight")]
        max_in_flight: usize,
        #[serde(default = "yes")]
        token_scores: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    /// JSONL of annotated samples for in-context examples.
    pub samples: Option<PathBuf>,
    /// JSONL of `{"text", "source"?}` corpus documents.
    pub corpus: Option<PathBuf>,
    pub segment_max_chars: usize,
    pub search_url: Option<String>,
    pub search_token: Option<String>,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            samples: None,
            corpus: None,
            segment_max_chars: DEFAULT_SEGMENT_MAX_CHARS,
            search_url: None,
            search_token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Contents processed concurrently within a chunk.
    pub parallelism: usize,
    /// Contents per chunk; feedback from one chunk is visible to the next.
    pub chunk_size: usize,
    /// Record per-stage wall-clock times in report entries.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            parallelism: 1,
            chunk_size: 256,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph: GraphConfig,
    pub calibration: CalibrationConfig,
    pub generation: GenerationConfig,
    pub encoder: EncoderConfig,
    pub completion: Option<CompletionConfig>,
    pub knowledge: KnowledgeConfig,
    pub pipeline: RunConfig,
}

/// Constructed backends referenced by a config.
#[derive(Clone)]
pub struct Backends {
    pub encoder: Arc<dyn Encoder>,
    pub completion: Option<Arc<dyn CompletionClient>>,
    pub search: Option<Arc<dyn SearchClient>>,
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(CompletionConfig::Mock { script, .. }) = &mut self.completion {
            fix(script);
        }
        if let Some(p) = &mut self.knowledge.samples {
            fix(p);
        }
        if let Some(p) = &mut self.knowledge.corpus {
            fix(p);
        }
    }

    /// Applies environment overrides through `lookup`. URL and token
    /// overrides only affect remote backends.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let EncoderConfig::Remote { url, token, .. } = &mut self.encoder {
            if let Some(v) = lookup("GRAPHTAG_ENCODER_URL") {
                *url = v;
            }
            if let Some(v) = lookup("GRAPHTAG_ENCODER_TOKEN") {
                *token = Some(v);
            }
        }
        if let Some(CompletionConfig::Remote { url, token, .. }) = &mut self.completion {
            if let Some(v) = lookup("GRAPHTAG_COMPLETION_URL") {
                *url = v;
            }
            if let Some(v) = lookup("GRAPHTAG_COMPLETION_TOKEN") {
                *token = Some(v);
            }
        }
        if let Some(v) = lookup("GRAPHTAG_SEARCH_URL") {
            self.knowledge.search_url = Some(v);
        }
        if let Some(v) = lookup("GRAPHTAG_SEARCH_TOKEN") {
            self.knowledge.search_token = Some(v);
        }
    }

    pub fn apply_process_env(&mut self) {
        self.apply_env(|k| std::env::var(k).ok().filter(|v| !v.is_empty()));
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.calibration.validate()?;
        if self.pipeline.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.pipeline.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        if self.generation.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be at least 1".into()));
        }
        if self.knowledge.segment_max_chars == 0 {
            return Err(Error::Config("segment_max_chars must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds every configured backend, failing on the first one that
    /// cannot be resolved.
    pub fn build_backends(&self) -> Result<Backends> {
        let encoder: Arc<dyn Encoder> = match &self.encoder {
            EncoderConfig::Reference { dim } => Arc::new(HashingEncoder::new(*dim)?),
            EncoderConfig::Remote {
                url,
                token,
                dim,
                max_in_flight,
            } => Arc::new(RemoteEncoder::new(
                url.clone(),
                token.clone(),
                *dim,
                *max_in_flight,
            )?),
        };
        let completion: Option<Arc<dyn CompletionClient>> = match &self.completion {
            None => None,
            Some(CompletionConfig::Mock {
                script,
                token_scores,
            }) => {
                let client = ScriptedClient::from_file(script)
                    .map_err(|e| Error::Config(format!("mock script {}: {e}", script.display())))?;
                Some(Arc::new(if *token_scores {
                    client
                } else {
                    client.without_token_scores()
                }))
            }
            Some(CompletionConfig::Remote {
                url,
                token,
                max_in_flight,
                token_scores,
            }) => Some(Arc::new(RemoteCompletionClient::new(
                url.clone(),
                token.clone(),
                *max_in_flight,
                *token_scores,
            )?)),
        };
        let search: Option<Arc<dyn SearchClient>> = match &self.knowledge.search_url {
            Some(url) => Some(Arc::new(HttpSearchClient::new(
                url.clone(),
                self.knowledge.search_token.clone(),
                default_completion_in_flight(),
            )?)),
            None => None,
        };
        Ok(Backends {
            encoder,
            completion,
            search,
        })
    }
}
