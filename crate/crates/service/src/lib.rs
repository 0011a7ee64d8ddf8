//! HTTP service around the bmguide engine: ventures submit versioned
//! business models, mentors matched by expertise rate them in rounds, and
//! guidance combines the crowd aggregate with the trained models.
//!
//! State lives in one embedded store ([`store`]); see [`api::ROUTES`] and
//! `openapi.json` for the endpoint catalog.

pub mod api;
pub mod auth;
pub mod config;
pub mod error;
pub mod guidance;
pub mod state;
pub mod store;

use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use bmguide_core::learn::ModelDocument;
use bmguide_core::schema::Taxonomy;

pub use config::ServiceConfig;
use error::ApiError;
use guidance::ActiveModels;
use state::{RegistryEntry, ValidationRound};
use store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("registry v{version} model `{name}`: {message}")]
    Model { version: u32, name: String, message: String },
    #[error("binding {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

pub struct App {
    pub config: ServiceConfig,
    pub taxonomy: Taxonomy,
    pub store: Store,
    active: RwLock<Option<Arc<ActiveModels>>>,
    clock: Clock,
    retrain_lock: tokio::sync::Mutex<()>,
}

fn wall_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn load_active(store: &Store, entry: &RegistryEntry) -> Result<ActiveModels, ServiceError> {
    let fail = |name: &str, message: String| ServiceError::Model { version: entry.version, name: name.into(), message };
    let mut models = Vec::new();
    let mut feature_names = Vec::new();
    for (name, file) in &entry.model_files {
        let text = store.read_model(file).map_err(|e| fail(name, e.to_string()))?;
        let doc = ModelDocument::from_json(&text).map_err(|e| fail(name, e.to_string()))?;
        if entry.model_hashes.get(name) != Some(&doc.hash()) {
            return Err(fail(name, "document hash differs from the registry".into()));
        }
        feature_names = doc.feature_names.clone();
        models.push((name.clone(), doc.model));
    }
    Ok(ActiveModels { registry_version: entry.version, feature_names, models, performance: entry.performance.clone() })
}

impl App {
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        Self::with_clock(config, Box::new(wall_clock))
    }

    /// Opens the store under `config.data_dir` and loads the latest registry entry.
    pub fn with_clock(config: ServiceConfig, clock: Clock) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let store = Store::open(&config.data_dir)?;
        let active = match store.read().registry.last() {
            Some(entry) => Some(Arc::new(load_active(&store, entry)?)),
            None => None,
        };
        Ok(Arc::new(Self {
            config,
            taxonomy: Taxonomy::iot(),
            store,
            active: RwLock::new(active),
            clock,
            retrain_lock: tokio::sync::Mutex::new(()),
        }))
    }

    pub fn now(&self) -> u64 {
        (self.clock)()
    }

    pub fn active(&self) -> Option<Arc<ActiveModels>> {
        self.active.read().expect("active lock").clone()
    }

    fn set_active(&self, models: ActiveModels) {
        *self.active.write().expect("active lock") = Some(Arc::new(models));
    }

    /// Closes a round and logs the aggregate with the active models' view of
    /// the judged snapshot.
    pub fn close_round(&self, round_id: &str) -> Result<ValidationRound, ApiError> {
        let active = self.active();
        let s = self.store.read();
        let round = s.round(round_id)?;
        let (machine, version) = match (&active, s.snapshot_model(&state::SnapshotRef {
            venture_id: round.venture_id.clone(),
            version: round.model_version,
        })) {
            (Some(a), Some(model)) => (a.predict(&self.taxonomy, model).unwrap_or_default(), Some(a.registry_version)),
            _ => (Default::default(), None),
        };
        drop(s);
        let now = self.now();
        self.store.commit(|s| s.close_round(round_id, machine, version, now).cloned())
    }

    /// Applies `round_timeout_secs`: rated rounds close normally, unrated
    /// ones close empty.
    pub fn close_expired(&self) -> Result<(), ApiError> {
        let Some(timeout) = self.config.round_timeout_secs else {
            return Ok(());
        };
        let now = self.now();
        for id in self.store.read().expired_rounds(timeout, now) {
            let rated = !self.store.read().round(&id)?.sheets.is_empty();
            if rated {
                self.close_round(&id)?;
            } else {
                self.store.commit(|s| {
                    let r = s.rounds.get_mut(&id).expect("listed");
                    r.status = state::RoundStatus::Closed;
                    r.closed_at = Some(now);
                    Ok(())
                })?;
            }
        }
        Ok(())
    }
}

pub fn router(app: Arc<App>) -> axum::Router {
    api::router(app)
}

/// Runs the service until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr = format!("{}:{}", config.host, config.port);
    let app = App::open(config)?;
    let listener =
        tokio::net::TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    tracing::info!(%addr, data_dir = %app.config.data_dir.display(), "serving");
    axum::serve(listener, router(app)).await.map_err(ServiceError::Serve)
}
