//! Shared domain types: quantile levels, targets and horizons, forecasts,
//! observations and weekly rounds.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five predictive quantile levels every forecast reports.
pub const LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Index of the median in [`LEVELS`].
pub const MEDIAN: usize = 2;

/// Time of day (UTC) at which a DAX target is considered realized.
pub const DAX_CLOSE_UTC: NaiveTime = match NaiveTime::from_hms_opt(16, 30, 0) {
    Some(t) => t,
    None => panic!("invalid close time"),
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("quantile levels must be five strictly increasing values in (0, 1), got {0:?}")]
    InvalidLevels(Vec<f64>),
    #[error("horizon {horizon} is not defined for target {target}")]
    HorizonNotInTarget { target: TargetKind, horizon: Horizon },
    #[error("unknown target label {0:?}")]
    UnknownTarget(String),
    #[error("malformed horizon label {0:?}")]
    MalformedHorizon(String),
    #[error("{0} is a {1}, rounds open on Wednesdays")]
    NotWednesday(NaiveDate, Weekday),
    #[error("round must cover at least one target")]
    NoTargets,
    #[error("target {0} listed twice in round")]
    DuplicateTarget(TargetKind),
    #[error("quantile {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("quantiles decrease between levels {} and {}", LEVELS[*.index - 1], LEVELS[*.index])]
    NonMonotone { index: usize },
}

/// Ordered probability levels of a challenge configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileLevels([f64; 5]);

impl QuantileLevels {
    pub fn new(levels: [f64; 5]) -> Result<Self, DomainError> {
        let in_unit = levels.iter().all(|&a| a > 0.0 && a < 1.0);
        let increasing = levels.windows(2).all(|w| w[0] < w[1]);
        if in_unit && increasing {
            Ok(Self(levels))
        } else {
            Err(DomainError::InvalidLevels(levels.to_vec()))
        }
    }

    pub fn standard() -> Self {
        Self(LEVELS)
    }

    pub fn as_array(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "DAX")]
    Dax,
    #[serde(rename = "temperature")]
    Temperature,
    #[serde(rename = "wind")]
    Wind,
}

const DAX_HORIZONS: [Horizon; 5] = [
    Horizon::days(1),
    Horizon::days(2),
    Horizon::days(5),
    Horizon::days(6),
    Horizon::days(7),
];

const WEATHER_HORIZONS: [Horizon; 5] = [
    Horizon::hours(36),
    Horizon::hours(48),
    Horizon::hours(60),
    Horizon::hours(72),
    Horizon::hours(84),
];

impl TargetKind {
    /// Targets in submission-file order.
    pub const ALL: [TargetKind; 3] = [TargetKind::Dax, TargetKind::Temperature, TargetKind::Wind];

    pub fn label(self) -> &'static str {
        match self {
            TargetKind::Dax => "DAX",
            TargetKind::Temperature => "temperature",
            TargetKind::Wind => "wind",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            TargetKind::Dax => "percent log-return",
            TargetKind::Temperature => "°C",
            TargetKind::Wind => "km/h",
        }
    }

    pub fn horizons(self) -> &'static [Horizon; 5] {
        match self {
            TargetKind::Dax => &DAX_HORIZONS,
            TargetKind::Temperature | TargetKind::Wind => &WEATHER_HORIZONS,
        }
    }

    pub fn is_weather(self) -> bool {
        !matches!(self, TargetKind::Dax)
    }

    /// Wind speed cannot be negative.
    pub fn is_nonnegative(self) -> bool {
        matches!(self, TargetKind::Wind)
    }

    pub fn has_horizon(self, horizon: Horizon) -> bool {
        self.horizons().contains(&horizon)
    }

    pub fn check_horizon(self, horizon: Horizon) -> Result<(), DomainError> {
        if self.has_horizon(horizon) {
            Ok(())
        } else {
            Err(DomainError::HorizonNotInTarget { target: self, horizon })
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TargetKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DAX" => Ok(TargetKind::Dax),
            "temperature" => Ok(TargetKind::Temperature),
            "wind" => Ok(TargetKind::Wind),
            other => Err(DomainError::UnknownTarget(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonUnit {
    Day,
    Hour,
}

/// Forecast lead: calendar days for the index, hours after the 00 UTC
/// model initialization for weather.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Horizon {
    pub magnitude: u32,
    pub unit: HorizonUnit,
}

impl Horizon {
    pub const fn days(n: u32) -> Self {
        Self { magnitude: n, unit: HorizonUnit::Day }
    }

    pub const fn hours(n: u32) -> Self {
        Self { magnitude: n, unit: HorizonUnit::Hour }
    }

    /// Number of Monday-to-Friday trading days spanned by a DAX calendar
    /// horizon counted from a Wednesday.
    pub fn trading_steps(self) -> Option<u32> {
        match (self.unit, self.magnitude) {
            (HorizonUnit::Day, 1) => Some(1),
            (HorizonUnit::Day, 2) => Some(2),
            (HorizonUnit::Day, 5) => Some(3),
            (HorizonUnit::Day, 6) => Some(4),
            (HorizonUnit::Day, 7) => Some(5),
            _ => None,
        }
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.unit {
            HorizonUnit::Day => "day",
            HorizonUnit::Hour => "hour",
        };
        write!(f, "{} {}", self.magnitude, unit)
    }
}

impl FromStr for Horizon {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || DomainError::MalformedHorizon(s.to_string());
        let (num, unit) = s.split_once(' ').ok_or_else(malformed)?;
        if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let magnitude: u32 = num.parse().map_err(|_| malformed())?;
        let unit = match unit {
            "day" => HorizonUnit::Day,
            "hour" => HorizonUnit::Hour,
            _ => return Err(malformed()),
        };
        Ok(Horizon { magnitude, unit })
    }
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Five predictive quantiles at [`LEVELS`] for one target, horizon and round.
///
/// Quantiles are finite and non-decreasing. Negative wind quantiles are
/// allowed in storage; [`QuantileForecast::for_scoring`] floors them at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileForecast {
    target: TargetKind,
    horizon: Horizon,
    round_date: NaiveDate,
    quantiles: [f64; 5],
}

impl QuantileForecast {
    pub fn new(
        target: TargetKind,
        horizon: Horizon,
        round_date: NaiveDate,
        quantiles: [f64; 5],
    ) -> Result<Self, DomainError> {
        target.check_horizon(horizon)?;
        check_quantiles(&quantiles)?;
        Ok(Self { target, horizon, round_date, quantiles })
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn round_date(&self) -> NaiveDate {
        self.round_date
    }

    pub fn quantiles(&self) -> &[f64; 5] {
        &self.quantiles
    }

    pub fn median(&self) -> f64 {
        self.quantiles[MEDIAN]
    }

    pub fn has_negative(&self) -> bool {
        self.quantiles.iter().any(|&q| q < 0.0)
    }

    /// The forecast as scored: wind quantiles floored at zero.
    pub fn for_scoring(&self) -> QuantileForecast {
        if self.target.is_nonnegative() && self.has_negative() {
            let mut clamped = self.clone();
            clamped.quantiles.iter_mut().for_each(|q| *q = q.max(0.0));
            clamped
        } else {
            self.clone()
        }
    }

    /// Same target, horizon and round as `other`.
    pub fn same_cell(&self, other: &QuantileForecast) -> bool {
        self.target == other.target
            && self.horizon == other.horizon
            && self.round_date == other.round_date
    }
}

pub(crate) fn check_quantiles(q: &[f64; 5]) -> Result<(), DomainError> {
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(DomainError::NonFinite { index, value });
    }
    if let Some(i) = (1..q.len()).find(|&i| q[i] < q[i - 1]) {
        return Err(DomainError::NonMonotone { index: i });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "lowercase")]
pub enum ObservationStatus {
    Observed(f64),
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub target: TargetKind,
    pub valid_time: DateTime<Utc>,
    pub status: ObservationStatus,
}

impl Observation {
    pub fn observed(target: TargetKind, valid_time: DateTime<Utc>, value: f64) -> Self {
        Self { target, valid_time, status: ObservationStatus::Observed(value) }
    }

    pub fn missing(target: TargetKind, valid_time: DateTime<Utc>) -> Self {
        Self { target, valid_time, status: ObservationStatus::Missing }
    }

    pub fn value(&self) -> Option<f64> {
        match self.status {
            ObservationStatus::Observed(v) => Some(v),
            ObservationStatus::Missing => None,
        }
    }
}

/// One weekly submission round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSpec {
    round_date: NaiveDate,
    targets: Vec<TargetKind>,
}

impl RoundSpec {
    /// A round covering `targets`, which are stored in submission-file order.
    pub fn new(round_date: NaiveDate, targets: &[TargetKind]) -> Result<Self, DomainError> {
        let weekday = round_date.weekday();
        if weekday != Weekday::Wed {
            return Err(DomainError::NotWednesday(round_date, weekday));
        }
        if targets.is_empty() {
            return Err(DomainError::NoTargets);
        }
        let mut sorted = targets.to_vec();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(DomainError::DuplicateTarget(w[0]));
        }
        Ok(Self { round_date, targets: sorted })
    }

    /// A round covering all three targets.
    pub fn full(round_date: NaiveDate) -> Result<Self, DomainError> {
        Self::new(round_date, &TargetKind::ALL)
    }

    pub fn round_date(&self) -> NaiveDate {
        self.round_date
    }

    pub fn targets(&self) -> &[TargetKind] {
        &self.targets
    }

    pub fn covers(&self, target: TargetKind) -> bool {
        self.targets.contains(&target)
    }

    /// Submission deadline, 23:59 local time on the round date.
    pub fn deadline(&self) -> NaiveDateTime {
        self.round_date.and_hms_opt(23, 59, 0).expect("valid time of day")
    }

    pub fn expected_row_count(&self) -> usize {
        self.targets.iter().map(|t| t.horizons().len()).sum()
    }

    /// Every (target, horizon) cell of the round in submission-file order.
    pub fn cells(&self) -> impl Iterator<Item = (TargetKind, Horizon)> + '_ {
        self.targets
            .iter()
            .flat_map(|&t| t.horizons().iter().map(move |&h| (t, h)))
    }
}

/// Time at which the outcome of a (target, horizon) forecast made in `round`
/// is realized.
///
/// Weather horizons count hours from 00 UTC on the round date; DAX horizons
/// count calendar days and resolve at the market close.
pub fn resolve_valid_time(
    round: &RoundSpec,
    target: TargetKind,
    horizon: Horizon,
) -> Result<DateTime<Utc>, DomainError> {
    target.check_horizon(horizon)?;
    let valid = match horizon.unit {
        HorizonUnit::Hour => {
            round.round_date.and_time(NaiveTime::MIN) + Duration::hours(horizon.magnitude.into())
        }
        HorizonUnit::Day => {
            (round.round_date + Duration::days(horizon.magnitude.into())).and_time(DAX_CLOSE_UTC)
        }
    };
    Ok(valid.and_utc())
}
