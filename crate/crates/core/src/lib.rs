//! Core library of the quantile hub: weekly quantile forecasts of a stock
//! index return and two station weather variables, their submission format,
//! benchmark and combined forecasts, scoring rules and leaderboards.

pub mod benchmarks;
pub mod domain;
pub mod ensemble;
pub mod ingest;
pub mod normal;
pub mod ranking;
pub mod scoring;
pub mod submission;

pub use domain::{
    resolve_valid_time, DomainError, Horizon, HorizonUnit, Observation, ObservationStatus,
    QuantileForecast, QuantileLevels, RoundSpec, TargetKind, LEVELS,
};
