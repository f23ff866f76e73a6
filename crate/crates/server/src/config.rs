//! Service configuration, read from TOML with environment overrides.

use std::path::{Path, PathBuf};

use hypotree_core::generation::{ProviderConfig, ProviderMode};
use hypotree_core::hints::{RetrieverConfig, RetrieverMode};
use hypotree_core::layout::LayoutConfig;
use serde::{Deserialize, Serialize};

/// Retrieval endpoint override; switches the retriever to remote mode.
pub const RETRIEVER_URL_ENV: &str = "HYPOTREE_RETRIEVER_URL";
/// Offline corpus directory override.
pub const CORPUS_DIR_ENV: &str = "HYPOTREE_CORPUS_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub bind_address: String,
    pub provider: ProviderConfig,
    pub retriever: RetrieverConfig,
    pub layout: LayoutConfig,
    pub store_root: PathBuf,
    /// Deterministic generation and offline retrieval; needs no secrets.
    pub mock_mode: bool,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            bind_address: "127.0.0.1:8080".into(),
            provider: ProviderConfig::default(),
            retriever: RetrieverConfig::default(),
            layout: LayoutConfig::default(),
            store_root: PathBuf::from("sessions"),
            mock_mode: false,
        }
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    /// Applies the retriever environment overrides.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(RETRIEVER_URL_ENV) {
            if !url.trim().is_empty() {
                self.retriever.mode = RetrieverMode::Remote;
                self.retriever.endpoint_url = Some(url);
            }
        }
        if let Ok(dir) = std::env::var(CORPUS_DIR_ENV) {
            if !dir.trim().is_empty() {
                self.retriever.corpus_dir = Some(dir.into());
            }
        }
    }

    /// The provider actually used: the mock whenever mock mode is on.
    pub fn effective_provider(&self) -> ProviderConfig {
        if self.mock_mode {
            ProviderConfig { mode: ProviderMode::Mock, ..self.provider.clone() }
        } else {
            self.provider.clone()
        }
    }

    /// The retriever actually used: offline whenever mock mode is on.
    pub fn effective_retriever(&self) -> RetrieverConfig {
        if self.mock_mode {
            RetrieverConfig { mode: RetrieverMode::Offline, ..self.retriever.clone() }
        } else {
            self.retriever.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.effective_provider().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.layout.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = self.effective_retriever();
        if r.mode == RetrieverMode::Remote && r.endpoint_url.is_none() {
            return Err(ConfigError::Invalid("remote retriever needs endpoint_url".into()));
        }
        Ok(())
    }
}
