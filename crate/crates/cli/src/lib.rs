//! Session service over the tableau engine: HTTP API, batch commands and
//! the provider configuration they share.

pub mod api;
pub mod batch;
pub mod config;
pub mod engine;
pub mod error;

pub use api::{router, AppState};
pub use engine::Engine;
pub use error::{ApiError, ErrorCode};
