//! Offline commands over session directories: analyze, replay, export.

use std::path::{Path, PathBuf};

use hypotree_core::analytics::{backtrack_table, engagement_table, session_report, SessionReport};
use hypotree_core::persistence::{canonical_json, diagram_json, SessionStore, StoreError};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("not a session directory: {0}")]
    NotASessionDir(PathBuf),
    #[error("replayed diagram differs from {path} (first difference at byte {offset})")]
    ReplayMismatch { path: PathBuf, offset: usize },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Store(StoreError::CorruptLog(_)) => "CorruptLog",
            CliError::Store(StoreError::UnknownSession(_)) => "UnknownSession",
            CliError::Store(_) => "StoreError",
            CliError::NotASessionDir(_) => "NotASessionDir",
            CliError::ReplayMismatch { .. } => "ReplayMismatch",
            CliError::Io { .. } => "Io",
            CliError::Config(_) => "InvalidConfig",
        }
    }

    /// 2 for a corrupt event log, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Store(StoreError::CorruptLog(_)) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed to stderr.
    pub fn to_json(&self) -> String {
        json!({"error": self.code(), "message": self.to_string()}).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A store rooted at the parent of `dir`, and the session id `dir` names.
pub fn open_session_dir(dir: &Path) -> Result<(SessionStore, String), CliError> {
    let not_session = || CliError::NotASessionDir(dir.to_owned());
    let abs = std::fs::canonicalize(dir).map_err(|_| not_session())?;
    let id = abs.file_name().and_then(|n| n.to_str()).ok_or_else(not_session)?.to_owned();
    let root = abs.parent().ok_or_else(not_session)?;
    let store = SessionStore::open(root)?;
    if !store.exists(&id) {
        return Err(not_session());
    }
    Ok((store, id))
}

pub fn report_for(dir: &Path) -> Result<SessionReport, CliError> {
    let (store, id) = open_session_dir(dir)?;
    let session = store.load_session(&id)?;
    Ok(session_report(&session).map_err(StoreError::from)?)
}

/// Reports for every directory, rendered as one JSON document or as the
/// two per-session tables in comma-delimited form.
pub fn analyze(dirs: &[PathBuf], format: Format) -> Result<String, CliError> {
    let reports = dirs.iter().map(|d| report_for(d)).collect::<Result<Vec<_>, _>>()?;
    let backtracks = backtrack_table(&reports);
    let engagement = engagement_table(&reports);
    Ok(match format {
        Format::Json => {
            let doc = json!({
                "reports": reports,
                "tables": {"backtracks": backtracks.to_json(), "engagement": engagement.to_json()},
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("report json");
            text.push('\n');
            text
        }
        Format::Csv => format!("{}\n{}", backtracks.to_csv(), engagement.to_csv()),
    })
}

/// Rebuilds the diagram from the log and compares it with `diagram.json`.
pub fn replay(dir: &Path) -> Result<Value, CliError> {
    let (store, id) = open_session_dir(dir)?;
    let session = store.rebuild_session(&id)?;
    let rebuilt = diagram_json(&session.tree, session.last_event_id());
    let persisted = store.diagram_text(&id)?;
    let identical = match &persisted {
        None => None,
        Some(text) if *text == rebuilt => Some(true),
        Some(text) => {
            let offset = text.bytes().zip(rebuilt.bytes()).position(|(a, b)| a != b).unwrap_or_else(|| text.len().min(rebuilt.len()));
            return Err(CliError::ReplayMismatch { path: dir.join("diagram.json"), offset });
        }
    };
    Ok(json!({
        "session_id": id,
        "events": session.events().len(),
        "nodes": session.tree.len(),
        "diagram_identical": identical,
    }))
}

/// Writes the diagram and the session report as one canonical JSON file.
pub fn export(dir: &Path, out: &Path) -> Result<(), CliError> {
    let (store, id) = open_session_dir(dir)?;
    let session = store.load_session(&id)?;
    let report = session_report(&session).map_err(StoreError::from)?;
    let diagram: Value = serde_json::from_str(&diagram_json(&session.tree, session.last_event_id()))
        .expect("diagram json is valid");
    let doc = json!({"session": session.meta, "diagram": diagram, "report": report});
    std::fs::write(out, canonical_json(&doc)).map_err(|source| CliError::Io { path: out.to_owned(), source })
}
