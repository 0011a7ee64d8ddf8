use std::path::{Path, PathBuf};

use bmguide_core::assign::{DEFAULT_ALPHA, DEFAULT_M, DEFAULT_M_BOUNDS};
use bmguide_core::fuse::Scheme;
use bmguide_core::judge::DEFAULT_SCHEMA;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub entrepreneur: String,
    pub mentor: String,
    pub admin: String,
}

impl Default for Tokens {
    fn default() -> Self {
        Self { entrepreneur: "entrepreneur-token".into(), mentor: "mentor-token".into(), admin: "admin-token".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub tokens: Tokens,
    pub default_schema: String,
    pub m: usize,
    pub m_bounds: (usize, usize),
    pub alpha: f64,
    pub assign_seed: u64,
    pub scheme: Scheme,
    /// Labeled snapshots required before `/admin/retrain` runs.
    pub retrain_min: usize,
    pub n_trees: usize,
    pub cv_folds: usize,
    pub threshold: f64,
    /// Open rounds older than this are closed on the next write.
    pub round_timeout_secs: Option<u64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("bmguide-data"),
            tokens: Tokens::default(),
            default_schema: DEFAULT_SCHEMA.into(),
            m: DEFAULT_M,
            m_bounds: DEFAULT_M_BOUNDS,
            alpha: DEFAULT_ALPHA,
            assign_seed: 0,
            scheme: Scheme::HybridPerf,
            retrain_min: 20,
            n_trees: 1000,
            cv_folds: 10,
            threshold: 0.5,
            round_timeout_secs: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg = Self::from_toml(&text).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tokens;
        if t.entrepreneur.is_empty() || t.mentor.is_empty() || t.admin.is_empty() {
            return Err(ConfigError::Invalid("tokens must be non-empty".into()));
        }
        if t.entrepreneur == t.mentor || t.entrepreneur == t.admin || t.mentor == t.admin {
            return Err(ConfigError::Invalid("each role needs its own token".into()));
        }
        bmguide_core::judge::RatingSchema::by_name(&self.default_schema)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::Invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.m_bounds.0 == 0 || self.m_bounds.0 > self.m_bounds.1 {
            return Err(ConfigError::Invalid(format!("bad m_bounds {:?}", self.m_bounds)));
        }
        if self.n_trees == 0 || self.cv_folds < 2 {
            return Err(ConfigError::Invalid("n_trees must be positive and cv_folds at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}
