//! Configuration, resolved from four layers: command-line flags, then
//! environment variables, then a TOML file, then built-in defaults.
//!
//! ```toml
//! port = 8080
//! data_dir = "metablend-data"
//! schemes = 3
//!
//! [oracle]
//! base_url = "https://api.openai.com/v1"
//! model = "gpt-4o"
//! api_key = "..."
//!
//! [knowledge]
//! base_url = "https://api.conceptnet.io"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const ENV_ORACLE_API_KEY: &str = "ORACLE_API_KEY";
pub const ENV_IMAGE_API_KEY: &str = "IMAGE_API_KEY";
pub const ENV_KNOWLEDGE_BASE_URL: &str = "KNOWLEDGE_BASE_URL";
pub const ENV_CACHE_DIR: &str = "CACHE_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {detail}")]
    Read { path: PathBuf, detail: String },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub fixtures: Option<PathBuf>,
    pub schemes: usize,
    pub max_in_flight: usize,
    pub temperature: f64,
    pub max_attempts: u32,
    pub request_timeout_secs: u64,
    pub oracle: Endpoint,
    pub images: Endpoint,
    pub embeddings: Endpoint,
    pub knowledge_base_url: String,
    /// Hosted sentiment classifier; the bundled lexicon is used when unset.
    pub sentiment_url: Option<String>,
    pub sentiment_api_key: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        let openai = "https://api.openai.com/v1";
        Config {
            port: 8080,
            data_dir: PathBuf::from("metablend-data"),
            cache_dir: PathBuf::from("metablend-data/cache"),
            offline: false,
            fixtures: None,
            schemes: 3,
            max_in_flight: 4,
            temperature: 0.7,
            max_attempts: 3,
            request_timeout_secs: 120,
            oracle: Endpoint {
                base_url: openai.into(),
                model: "gpt-4o".into(),
                api_key: None,
            },
            images: Endpoint {
                base_url: openai.into(),
                model: "dall-e-3".into(),
                api_key: None,
            },
            embeddings: Endpoint {
                base_url: openai.into(),
                model: "text-embedding-3-small".into(),
                api_key: None,
            },
            knowledge_base_url: "https://api.conceptnet.io".into(),
            sentiment_url: None,
            sentiment_api_key: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointSection {
    base_url: Option<String>,
    model: Option<String>,
    api_key: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {
    base_url: Option<String>,
    model: Option<String>,
    api_key: Option<String>,
    temperature: Option<f64>,
    max_attempts: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeSection {
    base_url: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SentimentSection {
    url: Option<String>,
    api_key: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    port: Option<u16>,
    data_dir: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    offline: Option<bool>,
    fixtures: Option<PathBuf>,
    schemes: Option<usize>,
    max_in_flight: Option<usize>,
    request_timeout_secs: Option<u64>,
    #[serde(default)]
    oracle: OracleSection,
    #[serde(default)]
    images: EndpointSection,
    #[serde(default)]
    embeddings: EndpointSection,
    #[serde(default)]
    knowledge: KnowledgeSection,
    #[serde(default)]
    sentiment: SentimentSection,
}

/// Values given on the command line. `None` defers to the lower layers.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub port: Option<u16>,
    pub data_dir: Option<PathBuf>,
    pub offline: bool,
    pub fixtures: Option<PathBuf>,
    pub schemes: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Config {
    /// Resolves the layers. `env` is a lookup so tests need not touch the
    /// process environment.
    pub fn resolve(
        flags: &Flags,
        env: &dyn Fn(&str) -> Option<String>,
        file: Option<&Path>,
    ) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut cache_set = false;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            let f: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            cfg.apply_file(f, &mut cache_set);
        }

        let env = |k: &str| env(k).filter(|v| !v.trim().is_empty());
        if let Some(key) = env(ENV_ORACLE_API_KEY) {
            cfg.oracle.api_key = Some(key);
        }
        if let Some(key) = env(ENV_IMAGE_API_KEY) {
            cfg.images.api_key = Some(key);
        }
        set(&mut cfg.knowledge_base_url, env(ENV_KNOWLEDGE_BASE_URL));
        if let Some(dir) = env(ENV_CACHE_DIR) {
            cfg.cache_dir = PathBuf::from(dir);
            cache_set = true;
        }

        set(&mut cfg.port, flags.port);
        set(&mut cfg.data_dir, flags.data_dir.clone());
        cfg.offline |= flags.offline;
        if flags.fixtures.is_some() {
            cfg.fixtures = flags.fixtures.clone();
        }
        set(&mut cfg.schemes, flags.schemes);

        if !cache_set {
            cfg.cache_dir = cfg.data_dir.join("cache");
        }
        // Keys fall back to the chat key so a single key covers one vendor.
        if cfg.images.api_key.is_none() {
            cfg.images.api_key = cfg.oracle.api_key.clone();
        }
        if cfg.embeddings.api_key.is_none() {
            cfg.embeddings.api_key = cfg.oracle.api_key.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, f: FileConfig, cache_set: &mut bool) {
        set(&mut self.port, f.port);
        set(&mut self.data_dir, f.data_dir);
        if let Some(dir) = f.cache_dir {
            self.cache_dir = dir;
            *cache_set = true;
        }
        set(&mut self.offline, f.offline);
        if f.fixtures.is_some() {
            self.fixtures = f.fixtures;
        }
        set(&mut self.schemes, f.schemes);
        set(&mut self.max_in_flight, f.max_in_flight);
        set(&mut self.request_timeout_secs, f.request_timeout_secs);
        set(&mut self.oracle.base_url, f.oracle.base_url);
        set(&mut self.oracle.model, f.oracle.model);
        if f.oracle.api_key.is_some() {
            self.oracle.api_key = f.oracle.api_key;
        }
        set(&mut self.temperature, f.oracle.temperature);
        set(&mut self.max_attempts, f.oracle.max_attempts);
        for (target, section) in [(&mut self.images, f.images), (&mut self.embeddings, f.embeddings)] {
            set(&mut target.base_url, section.base_url);
            set(&mut target.model, section.model);
            if section.api_key.is_some() {
                target.api_key = section.api_key;
            }
        }
        set(&mut self.knowledge_base_url, f.knowledge.base_url);
        if f.sentiment.url.is_some() {
            self.sentiment_url = f.sentiment.url;
        }
        if f.sentiment.api_key.is_some() {
            self.sentiment_api_key = f.sentiment.api_key;
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=metablend::blend::MAX_SCHEME_COUNT).contains(&self.schemes) {
            return Err(ConfigError::Invalid(format!(
                "schemes must be between 1 and {}, got {}",
                metablend::blend::MAX_SCHEME_COUNT,
                self.schemes
            )));
        }
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("oracle.max_attempts must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::Invalid("max_in_flight must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Invalid(format!(
                "oracle.temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}
