use thiserror::Error;

use crate::domain::{DomainError, Horizon, QuantileForecast, QuantileLevels, RoundSpec, TargetKind};
use crate::ingest::{EnsembleNwpForecast, NwpVariable, PriceSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("empirical quantiles of an empty sample")]
    EmptySample,
    #[error("sample value {0} is not finite")]
    NonFiniteSample(f64),
    #[error("DAX {horizon}: rolling window needs {needed} closes up to the anchor date, found {available}")]
    InsufficientHistory { horizon: Horizon, needed: usize, available: usize },
    #[error("no close price on or before round date")]
    NoAnchor,
    #[error("ensemble variable {variable} does not forecast {target}")]
    VariableMismatch { variable: NwpVariable, target: TargetKind },
    #[error("ensemble lead {0} h is not a {1} horizon")]
    LeadNotHorizon(u32, TargetKind),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Number of most recent trading days in the DAX benchmark's sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollingWindowConfig {
    pub window_length: usize,
}

impl Default for RollingWindowConfig {
    fn default() -> Self {
        Self { window_length: 1000 }
    }
}

/// Sample quantiles by linear interpolation between order statistics at
/// 1-based position `1 + (n - 1) alpha`.
pub fn empirical_quantiles(sample: &[f64], levels: &QuantileLevels) -> Result<[f64; 5], BenchmarkError> {
    if sample.is_empty() {
        return Err(BenchmarkError::EmptySample);
    }
    if let Some(&bad) = sample.iter().find(|v| !v.is_finite()) {
        return Err(BenchmarkError::NonFiniteSample(bad));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    let mut out = [0.0; 5];
    for (q, alpha) in out.iter_mut().zip(levels.iter()) {
        let h = last as f64 * alpha;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(last);
        let (a, b) = (sorted[lo], sorted[hi]);
        *q = (a + (h - lo as f64) * (b - a)).clamp(a, b);
    }
    for i in 1..out.len() {
        out[i] = out[i].max(out[i - 1]);
    }
    Ok(out)
}

/// Empirical quantiles of the most recent overlapping k-step returns up to the
/// round's anchor close, one forecast per DAX horizon.
pub fn dax_benchmark(
    prices: &PriceSeries,
    round: &RoundSpec,
    cfg: &RollingWindowConfig,
) -> Result<Vec<QuantileForecast>, BenchmarkError> {
    let anchor = prices.last_on_or_before(round.round_date()).ok_or(BenchmarkError::NoAnchor)?;
    let levels = QuantileLevels::standard();
    TargetKind::Dax
        .horizons()
        .iter()
        .map(|&h| {
            let k = h.trading_steps().expect("DAX horizons have trading steps") as usize;
            let needed = cfg.window_length + k;
            if anchor + 1 < needed {
                return Err(BenchmarkError::InsufficientHistory { horizon: h, needed, available: anchor + 1 });
            }
            let sample: Vec<f64> = (anchor + 1 - cfg.window_length..=anchor)
                .map(|end| prices.return_at(end, k).expect("window checked above"))
                .collect();
            let q = empirical_quantiles(&sample, &levels)?;
            Ok(QuantileForecast::new(TargetKind::Dax, h, round.round_date(), q)?)
        })
        .collect()
}

/// Empirical quantiles of the raw NWP ensemble; wind floored at zero.
pub fn raw_ensemble_benchmark(
    nwp: &EnsembleNwpForecast,
    target: TargetKind,
) -> Result<QuantileForecast, BenchmarkError> {
    if NwpVariable::for_target(target) != Some(nwp.variable) {
        return Err(BenchmarkError::VariableMismatch { variable: nwp.variable, target });
    }
    let horizon = Horizon::hours(nwp.lead_hours);
    if !target.has_horizon(horizon) {
        return Err(BenchmarkError::LeadNotHorizon(nwp.lead_hours, target));
    }
    let mut q = empirical_quantiles(&nwp.members, &QuantileLevels::standard())?;
    if target.is_nonnegative() {
        q.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(QuantileForecast::new(target, horizon, nwp.init_time.date_naive(), q)?)
}
