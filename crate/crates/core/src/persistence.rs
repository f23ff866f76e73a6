//! Filesystem session store.
//!
//! Layout of one session directory:
//!
//! ```text
//! <root>/<session_id>/
//!     session.json   metadata
//!     diagram.json   latest tree with layout
//!     events.jsonl   append-only interaction log
//!     dataset.csv    uploaded data, byte for byte
//!     hints-cache/   one JSON file per node
//!     .lock          held by the single writer
//! ```
//!
//! Every JSON document is written canonically: sorted keys, two-space
//! indentation, UTF-8, trailing newline. Whole-file writes go through a
//! temp file and a rename so a crash leaves either the old or the new file.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::events::{parse_jsonl, CorruptLog, InteractionEvent};
use crate::layout::{attach_layout, LayoutConfig};
use crate::model::{DiagramTree, HypothesisNode, NodeId, PositionedNode, TreeError};
use crate::session::{Session, SessionMeta};

pub const SESSION_FILE: &str = "session.json";
pub const DIAGRAM_FILE: &str = "diagram.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const DATASET_FILE: &str = "dataset.csv";
pub const HINTS_DIR: &str = "hints-cache";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already exists")]
    SessionExists(String),
    #[error("invalid session id {0:?}")]
    InvalidSessionId(String),
    #[error("event {found} does not follow {last}")]
    SequenceGap { last: u64, found: u64 },
    #[error("storage full")]
    StorageFull,
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    #[error("session {0} is locked by another writer")]
    Locked(String),
    #[error(transparent)]
    CorruptLog(#[from] CorruptLog),
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("io error: {0}")]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => StoreError::StorageFull,
            io::ErrorKind::PermissionDenied => StoreError::PermissionDenied(e.to_string()),
            _ => StoreError::Io(e),
        }
    }
}

/// Serializes with sorted keys, two-space indentation and a final newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // Round-tripping through Value sorts object keys.
    let value = serde_json::to_value(value).expect("serializable value");
    let mut out = serde_json::to_string_pretty(&value).expect("serializable value");
    out.push('\n');
    out
}

/// On-disk diagram document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DiagramDoc {
    root_id: NodeId,
    nodes: Vec<HypothesisNode>,
    #[serde(default)]
    layout: Vec<PositionedNode>,
    next_seq: u64,
    /// Id of the last event reflected in this diagram.
    event_seq: u64,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

/// Canonical diagram document for `tree` as of event `event_seq`. Nodes
/// and layout entries are in pre-order.
pub fn diagram_json(tree: &DiagramTree, event_seq: u64) -> String {
    let nodes: Vec<HypothesisNode> = tree.preorder().into_iter().cloned().collect();
    let layout = match &tree.layout {
        Some(positions) => nodes.iter().filter_map(|n| positions.get(&n.node_id).cloned()).collect(),
        None => Vec::new(),
    };
    canonical_json(&DiagramDoc {
        root_id: tree.root_id().clone(),
        nodes,
        layout,
        next_seq: tree.next_seq(),
        event_seq,
        extra: tree.extra.clone(),
    })
}

/// Parses a diagram document, returning the tree and its `event_seq`.
pub fn parse_diagram(text: &str) -> Result<(DiagramTree, u64), StoreError> {
    let doc: DiagramDoc = serde_json::from_str(text).map_err(|e| StoreError::InvalidDiagram(e.to_string()))?;
    let mut tree = DiagramTree::from_nodes(doc.root_id, doc.nodes, doc.next_seq)
        .map_err(|e: TreeError| StoreError::InvalidDiagram(e.to_string()))?;
    if !doc.layout.is_empty() {
        tree.layout = Some(doc.layout.into_iter().map(|p| (p.node_id.clone(), p)).collect());
    }
    tree.extra = doc.extra;
    Ok((tree, doc.event_seq))
}

/// Layout config recorded in the session metadata, or the default.
pub fn layout_config_of(meta: &SessionMeta) -> LayoutConfig {
    meta.extra
        .get("layout")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    write_atomic_with(path, bytes, |_| Ok(()))
}

/// `before_rename` runs after the temp file is durable; tests use it to
/// simulate a crash.
fn write_atomic_with(
    path: &Path,
    bytes: &[u8],
    before_rename: impl FnOnce(&Path) -> io::Result<()>,
) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    before_rename(&tmp)?;
    fs::rename(&tmp, path)
}

/// Exclusive writer lock on one session, released on drop.
#[derive(Debug)]
pub struct SessionLock {
    _file: File,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::InvalidSessionId(id.to_owned()));
        }
        Ok(self.root.join(id))
    }

    fn existing_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        let dir = self.session_dir(id)?;
        if !dir.join(SESSION_FILE).is_file() {
            return Err(StoreError::UnknownSession(id.to_owned()));
        }
        Ok(dir)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.existing_dir(id).is_ok()
    }

    /// Session ids with a metadata file, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(SESSION_FILE).is_file())
            .filter_map(|e| e.file_name().to_str().map(str::to_owned))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Creates the session directory with its metadata and dataset. Fails
    /// if the session already exists.
    pub fn create(&self, meta: &SessionMeta, dataset: &[u8]) -> Result<(), StoreError> {
        let dir = self.session_dir(&meta.session_id)?;
        if dir.join(SESSION_FILE).exists() {
            return Err(StoreError::SessionExists(meta.session_id.clone()));
        }
        fs::create_dir_all(dir.join(HINTS_DIR))?;
        write_atomic(&dir.join(DATASET_FILE), dataset)?;
        write_atomic(&dir.join(SESSION_FILE), canonical_json(meta).as_bytes())?;
        Ok(())
    }

    pub fn lock(&self, id: &str) -> Result<SessionLock, StoreError> {
        let dir = self.existing_dir(id)?;
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(dir.join(LOCK_FILE))?;
        match file.try_lock() {
            Ok(()) => Ok(SessionLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(id.to_owned())),
            Err(fs::TryLockError::Error(e)) => Err(e.into()),
        }
    }

    pub fn save_meta(&self, meta: &SessionMeta) -> Result<(), StoreError> {
        let dir = self.existing_dir(&meta.session_id)?;
        write_atomic(&dir.join(SESSION_FILE), canonical_json(meta).as_bytes())?;
        Ok(())
    }

    pub fn load_meta(&self, id: &str) -> Result<SessionMeta, StoreError> {
        let dir = self.existing_dir(id)?;
        let text = fs::read_to_string(dir.join(SESSION_FILE))?;
        serde_json::from_str(&text)
            .map_err(|e| StoreError::CorruptLog(CorruptLog::general(format!("session.json: {e}"))))
    }

    pub fn save_diagram(&self, id: &str, tree: &DiagramTree, event_seq: u64) -> Result<(), StoreError> {
        let dir = self.existing_dir(id)?;
        write_atomic(&dir.join(DIAGRAM_FILE), diagram_json(tree, event_seq).as_bytes())?;
        Ok(())
    }

    /// Raw `diagram.json` contents, if present.
    pub fn diagram_text(&self, id: &str) -> Result<Option<String>, StoreError> {
        let path = self.existing_dir(id)?.join(DIAGRAM_FILE);
        match fs::read_to_string(path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn dataset(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        Ok(fs::read(self.existing_dir(id)?.join(DATASET_FILE))?)
    }

    pub fn events_text(&self, id: &str) -> Result<String, StoreError> {
        let path = self.existing_dir(id)?.join(EVENTS_FILE);
        match fs::read_to_string(path) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn load_events(&self, id: &str) -> Result<Vec<InteractionEvent>, StoreError> {
        Ok(parse_jsonl(&self.events_text(id)?)?)
    }

    fn last_event_id(&self, id: &str) -> Result<u64, StoreError> {
        let text = self.events_text(id)?;
        match text.lines().rev().find(|l| !l.trim().is_empty()) {
            None => Ok(0),
            Some(line) => Ok(parse_jsonl(line)?.last().map_or(0, |e| e.event_id)),
        }
    }

    /// Appends one event line and flushes it to disk. The event must
    /// directly follow the last persisted one.
    pub fn append_event(&self, id: &str, event: &InteractionEvent) -> Result<(), StoreError> {
        let dir = self.existing_dir(id)?;
        let last = self.last_event_id(id)?;
        if event.event_id != last + 1 {
            return Err(StoreError::SequenceGap { last, found: event.event_id });
        }
        let mut f = OpenOptions::new().create(true).append(true).open(dir.join(EVENTS_FILE))?;
        let mut line = event.to_json_line();
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Loads a session. The tree comes from `diagram.json` when it reflects
    /// the whole log, otherwise it is rebuilt by replaying the log and laid
    /// out with the session's layout config.
    pub fn load_session(&self, id: &str) -> Result<Session, StoreError> {
        let meta = self.load_meta(id)?;
        let events = self.load_events(id)?;
        let last = events.last().map_or(0, |e| e.event_id);
        if let Some(text) = self.diagram_text(id)? {
            match parse_diagram(&text) {
                Ok((tree, seq)) if seq == last => return Ok(Session::from_parts(meta, tree, events)?),
                Ok(_) => tracing::info!(session = id, "diagram is stale, replaying log"),
                Err(e) => tracing::warn!(session = id, error = %e, "unreadable diagram, replaying log"),
            }
        }
        self.replay(meta, events)
    }

    fn replay(&self, meta: SessionMeta, events: Vec<InteractionEvent>) -> Result<Session, StoreError> {
        let cfg = layout_config_of(&meta);
        let mut session = Session::replay(meta, events)?;
        if let Err(e) = attach_layout(&mut session.tree, &cfg) {
            tracing::warn!(error = %e, "replayed diagram does not fit the viewport");
        }
        Ok(session)
    }

    /// Replays the persisted log regardless of `diagram.json`.
    pub fn rebuild_session(&self, id: &str) -> Result<Session, StoreError> {
        let meta = self.load_meta(id)?;
        let events = self.load_events(id)?;
        self.replay(meta, events)
    }

    fn hint_path(&self, id: &str, node: &NodeId) -> Result<PathBuf, StoreError> {
        if !valid_session_id(node.as_str()) {
            return Err(StoreError::InvalidSessionId(node.to_string()));
        }
        Ok(self.existing_dir(id)?.join(HINTS_DIR).join(format!("{node}.json")))
    }

    pub fn save_hint(&self, id: &str, node: &NodeId, value: &Value) -> Result<(), StoreError> {
        let path = self.hint_path(id, node)?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        write_atomic(&path, canonical_json(value).as_bytes())?;
        Ok(())
    }

    pub fn load_hint(&self, id: &str, node: &NodeId) -> Result<Option<Value>, StoreError> {
        match fs::read_to_string(self.hint_path(id, node)?) {
            Ok(t) => Ok(serde_json::from_str(&t).ok()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
