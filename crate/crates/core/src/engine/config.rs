use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linker::LinkerConfig;
use crate::metadata::{ClientConfig, CACHE_TTL_DEFAULT_SECS, TITLE_MATCH_THRESHOLD};
use crate::suggest::EmbeddingConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const DEFAULT_WORKSPACE: &str = "default";
pub const DEFAULT_BASE_URL: &str = "https://api.semanticscholar.org/graph/v1";
pub const DEFAULT_API_KEY_ENV: &str = "THREADLOOM_API_KEY";
pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataMode {
    /// Live HTTP service.
    Http,
    /// Local corpus file served in-process.
    Corpus,
    /// Recorded responses only; misses are errors.
    Fixture,
    /// No metadata at all.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataConfig {
    pub mode: MetadataMode,
    pub base_url: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub fixture_dir: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    /// Defaults to `<home>/cache/metadata`.
    pub cache_dir: Option<PathBuf>,
    pub record_dir: Option<PathBuf>,
    pub requests_per_second: f64,
    pub cache_ttl_secs: u64,
    pub title_threshold: f64,
    pub max_retries: u32,
}

impl Default for MetadataConfig {
    fn default() -> Self {
        MetadataConfig {
            mode: MetadataMode::Http,
            base_url: DEFAULT_BASE_URL.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            fixture_dir: None,
            corpus: None,
            cache_dir: None,
            record_dir: None,
            requests_per_second: 1.0,
            cache_ttl_secs: CACHE_TTL_DEFAULT_SECS,
            title_threshold: TITLE_MATCH_THRESHOLD,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { bind: "127.0.0.1".into(), port: DEFAULT_PORT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub workspace: String,
    pub metadata: MetadataConfig,
    pub linker: LinkerConfig,
    pub embedding: EmbeddingConfig,
    pub service: ServiceConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workspace: DEFAULT_WORKSPACE.into(),
            metadata: MetadataConfig::default(),
            linker: LinkerConfig::default(),
            embedding: EmbeddingConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl EngineConfig {
    /// Reads `<home>/config.toml`, or the defaults when it does not exist.
    pub fn load(home: &Path) -> Result<Self, String> {
        let path = home.join(CONFIG_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => Self::parse(&text).map_err(|e| format!("{}: {e}", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(format!("{}: {e}", path.display())),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.workspace.is_empty() || !self.workspace.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) {
            return Err(format!("invalid workspace name `{}`", self.workspace));
        }
        let m = &self.metadata;
        if !(m.requests_per_second > 0.0 && m.requests_per_second.is_finite()) {
            return Err("metadata.requests_per_second must be positive".into());
        }
        if !(0.0..=1.0).contains(&m.title_threshold) {
            return Err("metadata.title_threshold must lie in [0, 1]".into());
        }
        match m.mode {
            MetadataMode::Fixture if m.fixture_dir.is_none() => return Err("fixture mode needs metadata.fixture_dir".into()),
            MetadataMode::Corpus if m.corpus.is_none() => return Err("corpus mode needs metadata.corpus".into()),
            _ => {}
        }
        let l = &self.linker;
        if !(l.overlap_threshold > 0.0 && l.overlap_threshold <= 1.0) {
            return Err("linker.overlap_threshold must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Relative paths in the config resolve against `home`.
    pub fn resolve_paths(&mut self, home: &Path) {
        let m = &mut self.metadata;
        for p in [&mut m.fixture_dir, &mut m.corpus, &mut m.cache_dir, &mut m.record_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = home.join(&*p);
            }
        }
        if m.cache_dir.is_none() && m.mode != MetadataMode::Fixture {
            m.cache_dir = Some(home.join("cache").join("metadata"));
        }
    }

    pub fn client_config(&self) -> ClientConfig {
        let m = &self.metadata;
        ClientConfig {
            requests_per_sec: m.requests_per_second,
            cache_dir: m.cache_dir.clone(),
            ttl_secs: m.cache_ttl_secs,
            record_dir: m.record_dir.clone(),
            title_threshold: m.title_threshold,
            max_retries: m.max_retries,
            ..ClientConfig::default()
        }
    }
}
