//! Level-wise mean and median combinations of participant forecasts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, QuantileForecast};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("ensemble needs at least {needed} members, got {got}")]
    TooFewMembers { needed: usize, got: usize },
    #[error("members do not share target, horizon and round (member {0})")]
    MixedCells(usize),
    #[error("min_members must be at least 1")]
    ZeroMinMembers,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleMethod {
    Mean,
    Median,
}

impl EnsembleMethod {
    /// Alias under which the combination is stored and displayed.
    pub fn alias(self) -> &'static str {
        match self {
            EnsembleMethod::Mean => "ensemble_mean",
            EnsembleMethod::Median => "ensemble_median",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub method: EnsembleMethod,
    /// Aliases whose forecasts went into the combination, for the record.
    pub member_aliases: Vec<String>,
    pub min_members: usize,
}

impl EnsembleSpec {
    pub fn new(method: EnsembleMethod, min_members: usize) -> Result<Self, EnsembleError> {
        if min_members == 0 {
            return Err(EnsembleError::ZeroMinMembers);
        }
        Ok(Self { method, member_aliases: Vec::new(), min_members })
    }
}

/// Combines member forecasts level by level.
///
/// Values at each level are sorted before reduction so that the result does
/// not depend on member order, down to the last bit.
pub fn combine(members: &[QuantileForecast], spec: &EnsembleSpec) -> Result<QuantileForecast, EnsembleError> {
    if spec.min_members == 0 {
        return Err(EnsembleError::ZeroMinMembers);
    }
    if members.len() < spec.min_members || members.is_empty() {
        return Err(EnsembleError::TooFewMembers { needed: spec.min_members.max(1), got: members.len() });
    }
    let first = &members[0];
    if let Some(i) = members.iter().position(|m| !m.same_cell(first)) {
        return Err(EnsembleError::MixedCells(i));
    }

    let mut out = [0.0; 5];
    let mut column = Vec::with_capacity(members.len());
    for (level, q) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(members.iter().map(|m| m.quantiles()[level]));
        column.sort_by(f64::total_cmp);
        *q = match spec.method {
            EnsembleMethod::Mean => mean_sorted(&column),
            EnsembleMethod::Median => median_sorted(&column),
        };
    }
    // Rounding in the mean can in principle undo the ordering by an ulp.
    for i in 1..out.len() {
        out[i] = out[i].max(out[i - 1]);
    }
    Ok(QuantileForecast::new(first.target(), first.horizon(), first.round_date(), out)?)
}

fn mean_sorted(sorted: &[f64]) -> f64 {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return lo;
    }
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    mean.clamp(lo, hi)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        a + (b - a) / 2.0
    }
}
