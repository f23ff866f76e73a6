//! Shared service state: open sessions, their locks and hint caches.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use hypotree_core::dataset::{ingest, DatasetHandle};
use hypotree_core::generation::TextGenerator;
use hypotree_core::hints::{Corpus, HintCache, RetrieverConfig};
use hypotree_core::layout::{attach_layout, LayoutConfig};
use hypotree_core::model::PositionedNode;
use hypotree_core::persistence::{layout_config_of, SessionLock, SessionStore};
use hypotree_core::Session;
use serde::Serialize;

use crate::config::{ApiConfig, ConfigError};
use crate::error::ApiError;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// One open session. Mutations are serialized by `session`; at most one
/// generation runs at a time, tracked by `busy`.
pub struct SessionSlot {
    pub id: String,
    session: Mutex<Session>,
    busy: AtomicBool,
    pub dataset: DatasetHandle,
    pub hints: HintCache,
    pub layout: LayoutConfig,
    _lock: SessionLock,
}

impl SessionSlot {
    /// A snapshot of the current session.
    pub fn snapshot(&self) -> Session {
        self.session.lock().expect("session mutex poisoned").clone()
    }

    /// Claims the generation slot, or fails with BusySession.
    pub fn begin_generation(self: &Arc<Self>) -> Result<BusyGuard, ApiError> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ApiError::busy(&self.id))?;
        Ok(BusyGuard(self.clone()))
    }
}

/// Releases the generation slot on drop.
pub struct BusyGuard(Arc<SessionSlot>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

/// Positions, edges and the config they were computed with.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutView {
    pub positions: Vec<PositionedNode>,
    pub edges: Vec<hypotree_core::layout::EdgeRoute>,
    pub config: LayoutConfig,
    /// Set when the tree does not fit the viewport even at the smallest
    /// node width; positions are then empty.
    pub error: Option<String>,
}

/// Lays out `session.tree` in place and describes the result.
pub fn relayout(session: &mut Session, cfg: &LayoutConfig) -> LayoutView {
    match attach_layout(&mut session.tree, cfg) {
        Ok(used) => {
            let positions_map = session.tree.layout.clone().unwrap_or_default();
            let positions = session
                .tree
                .preorder()
                .into_iter()
                .filter_map(|n| positions_map.get(&n.node_id).cloned())
                .collect();
            let edges = hypotree_core::layout::edge_routes(&positions_map, &session.tree, &used);
            LayoutView { positions, edges, config: used, error: None }
        }
        Err(e) => LayoutView { positions: Vec::new(), edges: Vec::new(), config: *cfg, error: Some(e.to_string()) },
    }
}

pub struct AppState {
    pub config: ApiConfig,
    pub store: SessionStore,
    pub generator: Arc<dyn TextGenerator>,
    pub retriever: RetrieverConfig,
    pub corpus: Option<Arc<Corpus>>,
    pub clock: Clock,
    slots: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    /// State for `config`, generating through the configured provider.
    pub fn new(config: ApiConfig) -> Result<Self, ConfigError> {
        let generator: Arc<dyn TextGenerator> = Arc::new(config.effective_provider());
        Self::with_generator(config, generator)
    }

    /// State with an explicit generator, for tests and embedding.
    pub fn with_generator(config: ApiConfig, generator: Arc<dyn TextGenerator>) -> Result<Self, ConfigError> {
        config.validate()?;
        let store = SessionStore::open(&config.store_root)
            .map_err(|e| ConfigError::Invalid(format!("store_root: {e}")))?;
        let retriever = config.effective_retriever();
        let corpus = match &retriever.corpus_dir {
            Some(dir) => Some(Arc::new(
                Corpus::load(dir).map_err(|e| ConfigError::Invalid(format!("corpus_dir {}: {e}", dir.display())))?,
            )),
            None => None,
        };
        Ok(Self {
            config,
            store,
            generator,
            retriever,
            corpus,
            clock: Arc::new(Utc::now),
            slots: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    /// The open session `id`, loading it from the store on first use.
    pub fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let mut slots = self.slots.lock().expect("slot map poisoned");
        if let Some(slot) = slots.get(id) {
            return Ok(slot.clone());
        }
        let lock = self.store.lock(id)?;
        let session = self.store.load_session(id)?;
        let bytes = self.store.dataset(id)?;
        let name = dataset_name(&session);
        let (_, dataset) = ingest(&bytes, &name)?;
        let layout = layout_config_of(&session.meta);
        let slot = Arc::new(SessionSlot {
            id: id.to_owned(),
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
            dataset,
            hints: HintCache::default(),
            layout,
            _lock: lock,
        });
        slots.insert(id.to_owned(), slot.clone());
        Ok(slot)
    }

    /// Registers a freshly created and persisted session.
    pub fn insert_new(
        &self,
        session: Session,
        dataset: DatasetHandle,
        lock: SessionLock,
    ) -> Arc<SessionSlot> {
        let slot = Arc::new(SessionSlot {
            id: session.meta.session_id.clone(),
            layout: layout_config_of(&session.meta),
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
            dataset,
            hints: HintCache::default(),
            _lock: lock,
        });
        self.slots
            .lock()
            .expect("slot map poisoned")
            .insert(slot.id.clone(), slot.clone());
        slot
    }

    /// Applies `f` to a copy of the session, appends the events it emitted,
    /// then installs the copy and rewrites the diagram. The in-memory session
    /// only changes once its events are durable.
    pub fn commit<R>(
        &self,
        slot: &SessionSlot,
        f: impl FnOnce(&mut Session) -> Result<R, ApiError>,
    ) -> Result<(R, LayoutView), ApiError> {
        let mut guard = slot.session.lock().expect("session mutex poisoned");
        let mut next = guard.clone();
        let before = next.events().len();
        let out = f(&mut next)?;
        for event in &next.events()[before..] {
            self.store.append_event(&slot.id, event)?;
        }
        let view = relayout(&mut next, &slot.layout);
        *guard = next;
        if let Err(e) = self.store.save_diagram(&slot.id, &guard.tree, guard.last_event_id()) {
            // The log is authoritative; a stale diagram is rebuilt on load.
            tracing::warn!(session = %slot.id, error = %e, "could not write diagram");
        }
        Ok((out, view))
    }

    /// Runs `f` while holding the session's mutation lock.
    pub fn with_session<R>(&self, slot: &SessionSlot, f: impl FnOnce(&Session) -> R) -> R {
        f(&slot.session.lock().expect("session mutex poisoned"))
    }
}

/// The name the dataset was uploaded under, recorded in the metadata.
pub fn dataset_name(session: &Session) -> String {
    session
        .meta
        .extra
        .get("dataset_name")
        .and_then(|v| v.as_str())
        .unwrap_or("dataset")
        .to_owned()
}
