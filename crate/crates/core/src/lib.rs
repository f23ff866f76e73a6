//! Engine for mixed-initiative hypothesis exploration.
//!
//! A session starts from an analysis intent and a tabular dataset. A text
//! generator proposes five hypotheses, and the user branches any of them
//! into three more, building an ordered tree. Each node carries hints (a
//! chart computed from the data and retrieved supporting text), every
//! exploration action is logged, and the logs feed the analytics.

pub mod analytics;
pub mod dataset;
pub mod events;
pub mod generation;
pub mod hints;
pub mod layout;
pub mod model;
pub mod persistence;
pub mod session;

pub use events::{CorruptLog, EventKind, InteractionEvent};
pub use model::{DiagramTree, HypothesisDraft, HypothesisNode, NodeId, BRANCH_HYPOTHESES, INITIAL_HYPOTHESES};
pub use session::{Session, SessionMeta};
