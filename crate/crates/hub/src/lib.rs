//! Operator side of the quantile forecasting hub: a file-backed challenge
//! store, the weekly ingest/score/publish pipeline, and a read-only JSON API.

pub mod api;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod store;

pub use config::HubConfig;
pub use pipeline::{Hub, HubError};
