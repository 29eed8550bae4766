//! HTTP service and configuration for the rallyanchor command-line tool.

pub mod config;
pub mod http;

pub use config::{Config, ConfigError};
pub use http::{router, AppState};
