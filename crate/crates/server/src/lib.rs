//! HTTP JSON API and command-line tools for the hypothesis-tree engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod schema;
pub mod state;

pub use api::router;
pub use config::ApiConfig;
pub use error::ApiError;
pub use state::AppState;
