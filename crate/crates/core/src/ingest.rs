//! Loaders for index prices, station observations and NWP ensemble files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{resolve_valid_time, DomainError, Horizon, Observation, RoundSpec, TargetKind};

/// Number of members in every NWP ensemble forecast.
pub const ENSEMBLE_SIZE: usize = 40;

/// Longest lead time distributed with the NWP files.
pub const MAX_LEAD_HOURS: u32 = 120;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: &'static str, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: date {date} is not after the previous row")]
    Unsorted { line: u64, date: NaiveDate },
    #[error("line {line}: close price {value} must be positive")]
    NonPositivePrice { line: u64, value: f64 },
    #[error("line {line}: value is not finite")]
    NonFinite { line: u64 },
    #[error("line {line}: duplicate timestamp {time}")]
    DuplicateTimestamp { line: u64, time: DateTime<Utc> },
    #[error("line {line}: wind speed {value} is negative")]
    NegativeWind { line: u64, value: f64 },
    #[error("{0} outcomes are derived from prices, not loaded as observations")]
    UnsupportedTarget(TargetKind),
    #[error("no close price on {0}")]
    DateNotInSeries(NaiveDate),
    #[error("{steps}-step return at {date} needs more price history")]
    InsufficientHistory { date: NaiveDate, steps: usize },
    #[error("no close price on or before {0}")]
    NoAnchor(NaiveDate),
    #[error("line {line}: block {variable} lead {lead} has {found} members, expected {ENSEMBLE_SIZE}")]
    MemberCount { line: u64, variable: NwpVariable, lead: u32, found: usize },
    #[error("line {line}: unknown NWP variable {code:?}")]
    UnknownVariable { line: u64, code: String },
    #[error("line {line}: second block for {variable} lead {lead}")]
    DuplicateBlock { line: u64, variable: NwpVariable, lead: u32 },
    #[error("line {line}: lead {lead} h outside 0..={MAX_LEAD_HOURS}")]
    LeadOutOfRange { line: u64, lead: u32 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &'static str) -> Result<(), IngestError> {
    let found = match reader.headers() {
        Ok(h) => h.iter().collect::<Vec<_>>().join(","),
        Err(e) => return Err(IngestError::Malformed { line: 1, message: e.to_string() }),
    };
    // An empty file has no header at all.
    if found != expected && !found.is_empty() {
        return Err(IngestError::Header { expected, found });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_record(
    result: Result<csv::StringRecord, csv::Error>,
) -> Result<(u64, csv::StringRecord), IngestError> {
    let record = result.map_err(|e| IngestError::Malformed {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    })?;
    let line = record_line(&record);
    if record.len() != 2 {
        return Err(IngestError::Malformed { line, message: format!("expected 2 fields, found {}", record.len()) });
    }
    Ok((line, record))
}

fn parse_value(field: &str, line: u64) -> Result<f64, IngestError> {
    let v: f64 = field
        .parse()
        .map_err(|_| IngestError::Malformed { line, message: format!("{field:?} is not a number") })?;
    if !v.is_finite() {
        return Err(IngestError::NonFinite { line });
    }
    Ok(v)
}

/// Daily index closes, dates strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceSeries {
    entries: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn from_entries(entries: Vec<(NaiveDate, f64)>) -> Result<Self, IngestError> {
        for (i, &(date, price)) in entries.iter().enumerate() {
            let line = i as u64 + 2;
            if !(price > 0.0) || !price.is_finite() {
                return Err(IngestError::NonPositivePrice { line, value: price });
            }
            if i > 0 && entries[i - 1].0 >= date {
                return Err(IngestError::Unsorted { line, date });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(NaiveDate, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.entries.binary_search_by_key(&date, |e| e.0).ok()
    }

    pub fn close(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).map(|i| self.entries[i].1)
    }

    /// Index of the last trading day on or before `date`.
    pub fn last_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        match self.entries.binary_search_by_key(&date, |e| e.0) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }

    /// `k`-step log return in percent ending at entry `end`.
    pub fn return_at(&self, end: usize, k: usize) -> Option<f64> {
        let start = end.checked_sub(k)?;
        let p1 = self.entries.get(end)?.1;
        let p0 = self.entries[start].1;
        Some(100.0 * (libm::log(p1) - libm::log(p0)))
    }

    /// Inserts or replaces closes, keeping the series sorted.
    pub fn merge(&mut self, other: &PriceSeries) {
        let mut map: BTreeMap<NaiveDate, f64> = self.entries.iter().copied().collect();
        map.extend(other.entries.iter().copied());
        self.entries = map.into_iter().collect();
    }
}

pub const PRICE_HEADER: &str = "date,close";

pub fn parse_prices(text: &str) -> Result<PriceSeries, IngestError> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, PRICE_HEADER)?;
    let mut entries: Vec<(NaiveDate, f64)> = Vec::new();
    for result in reader.records() {
        let (line, record) = parse_record(result)?;
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| IngestError::Malformed { line, message: format!("date {:?}: {e}", &record[0]) })?;
        let price = parse_value(&record[1], line)?;
        if price <= 0.0 {
            return Err(IngestError::NonPositivePrice { line, value: price });
        }
        if let Some(&(prev, _)) = entries.last() {
            if prev >= date {
                return Err(IngestError::Unsorted { line, date });
            }
        }
        entries.push((date, price));
    }
    Ok(PriceSeries { entries })
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries, IngestError> {
    parse_prices(&read(path.as_ref())?)
}

pub fn write_prices(prices: &PriceSeries) -> String {
    let mut out = format!("{PRICE_HEADER}\n");
    for (d, p) in &prices.entries {
        out.push_str(&format!("{},{p}\n", d.format("%Y-%m-%d")));
    }
    out
}

/// Accumulated `k`-trading-day log return in percent ending on `date`:
/// `100 (ln P_t - ln P_{t-k})`.
pub fn compute_return(prices: &PriceSeries, date: NaiveDate, k: usize) -> Result<f64, IngestError> {
    let end = prices.index_of(date).ok_or(IngestError::DateNotInSeries(date))?;
    prices
        .return_at(end, k)
        .ok_or(IngestError::InsufficientHistory { date, steps: k })
}

/// Realized DAX target for a round: the log return from the last close on or
/// before the round date to the close on the horizon's calendar date.
/// Missing when the market has no close on that date.
pub fn dax_observation(
    prices: &PriceSeries,
    round: &RoundSpec,
    horizon: Horizon,
) -> Result<Observation, IngestError> {
    let valid_time = resolve_valid_time(round, TargetKind::Dax, horizon)?;
    let anchor = prices
        .last_on_or_before(round.round_date())
        .ok_or(IngestError::NoAnchor(round.round_date()))?;
    let anchor_price = prices.entries[anchor].1;
    Ok(match prices.close(valid_time.date_naive()) {
        Some(p) => Observation::observed(
            TargetKind::Dax,
            valid_time,
            100.0 * (libm::log(p) - libm::log(anchor_price)),
        ),
        None => Observation::missing(TargetKind::Dax, valid_time),
    })
}

/// Station observations of one weather target.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    target: TargetKind,
    values: BTreeMap<DateTime<Utc>, f64>,
}

impl ObservationSeries {
    pub fn new(target: TargetKind) -> Result<Self, IngestError> {
        if !target.is_weather() {
            return Err(IngestError::UnsupportedTarget(target));
        }
        Ok(Self { target, values: BTreeMap::new() })
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DateTime<Utc>, f64)> + '_ {
        self.values.iter().map(|(t, v)| (*t, *v))
    }

    /// Observation at `valid_time`; gaps are reported as missing.
    pub fn get(&self, valid_time: DateTime<Utc>) -> Observation {
        match self.values.get(&valid_time) {
            Some(&v) => Observation::observed(self.target, valid_time, v),
            None => Observation::missing(self.target, valid_time),
        }
    }

    pub fn value(&self, valid_time: DateTime<Utc>) -> Option<f64> {
        self.values.get(&valid_time).copied()
    }

    /// Inserts or replaces values from `other`.
    pub fn merge(&mut self, other: &ObservationSeries) {
        self.values.extend(other.values.iter().map(|(t, v)| (*t, *v)));
    }
}

pub const OBSERVATION_HEADER: &str = "timestamp_utc,value";

fn parse_timestamp(s: &str, line: u64) -> Result<DateTime<Utc>, IngestError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| IngestError::Malformed { line, message: format!("timestamp {s:?}: {e}") })
}

fn is_synoptic(t: &DateTime<Utc>) -> bool {
    (t.hour() == 0 || t.hour() == 12) && t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

/// Parses station observations. Rows not at 00 or 12 UTC are dropped.
pub fn parse_observations(text: &str, target: TargetKind) -> Result<ObservationSeries, IngestError> {
    let mut series = ObservationSeries::new(target)?;
    let mut reader = csv_reader(text);
    check_header(&mut reader, OBSERVATION_HEADER)?;
    for result in reader.records() {
        let (line, record) = parse_record(result)?;
        let time = parse_timestamp(&record[0], line)?;
        let value = parse_value(&record[1], line)?;
        if target.is_nonnegative() && value < 0.0 {
            return Err(IngestError::NegativeWind { line, value });
        }
        if !is_synoptic(&time) {
            continue;
        }
        if series.values.insert(time, value).is_some() {
            return Err(IngestError::DuplicateTimestamp { line, time });
        }
    }
    Ok(series)
}

pub fn load_observations(path: impl AsRef<Path>, target: TargetKind) -> Result<ObservationSeries, IngestError> {
    parse_observations(&read(path.as_ref())?, target)
}

pub fn write_observations(series: &ObservationSeries) -> String {
    let mut out = format!("{OBSERVATION_HEADER}\n");
    for (t, v) in &series.values {
        out.push_str(&format!("{},{v}\n", t.format("%Y-%m-%dT%H:%M:%SZ")));
    }
    out
}

/// Variables distributed with the NWP ensemble files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NwpVariable {
    MeanSeaLevelPressure,
    TotalCloudCover,
    DirectShortwaveRadiation,
    #[serde(rename = "temperature_2m")]
    Temperature2m,
    #[serde(rename = "temperature_850hpa")]
    Temperature850hPa,
    #[serde(rename = "wind_10m")]
    Wind10m,
    #[serde(rename = "wind_gust_10m")]
    WindGust10m,
}

impl NwpVariable {
    pub const ALL: [NwpVariable; 7] = [
        NwpVariable::MeanSeaLevelPressure,
        NwpVariable::TotalCloudCover,
        NwpVariable::DirectShortwaveRadiation,
        NwpVariable::Temperature2m,
        NwpVariable::Temperature850hPa,
        NwpVariable::Wind10m,
        NwpVariable::WindGust10m,
    ];

    pub fn code(self) -> &'static str {
        match self {
            NwpVariable::MeanSeaLevelPressure => "mean_sea_level_pressure",
            NwpVariable::TotalCloudCover => "total_cloud_cover",
            NwpVariable::DirectShortwaveRadiation => "direct_shortwave_radiation",
            NwpVariable::Temperature2m => "temperature_2m",
            NwpVariable::Temperature850hPa => "temperature_850hpa",
            NwpVariable::Wind10m => "wind_10m",
            NwpVariable::WindGust10m => "wind_gust_10m",
        }
    }

    /// The ensemble variable that forecasts a target directly.
    pub fn for_target(target: TargetKind) -> Option<NwpVariable> {
        match target {
            TargetKind::Temperature => Some(NwpVariable::Temperature2m),
            TargetKind::Wind => Some(NwpVariable::Wind10m),
            TargetKind::Dax => None,
        }
    }
}

impl fmt::Display for NwpVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for NwpVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NwpVariable::ALL
            .into_iter()
            .find(|v| v.code() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// One ensemble forecast of one variable at one lead time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleNwpForecast {
    pub variable: NwpVariable,
    pub init_time: DateTime<Utc>,
    pub lead_hours: u32,
    pub members: Vec<f64>,
}

impl EnsembleNwpForecast {
    pub fn valid_time(&self) -> DateTime<Utc> {
        self.init_time + Duration::hours(self.lead_hours.into())
    }

    pub fn mean(&self) -> f64 {
        self.members.iter().sum::<f64>() / self.members.len() as f64
    }

    /// Sample variance (denominator n - 1).
    pub fn variance(&self) -> f64 {
        let n = self.members.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.members.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }
}

/// Parses an NWP text file:
///
/// ```text
/// init_time=2021-11-03T00:00:00Z
/// variable=temperature_2m lead=36
/// 8.1,8.4,...            (40 comma-separated members)
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_nwp(text: &str) -> Result<Vec<EnsembleNwpForecast>, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, first) = lines
        .next()
        .ok_or(IngestError::Malformed { line: 1, message: "missing init_time line".into() })?;
    let init = first
        .strip_prefix("init_time=")
        .ok_or_else(|| IngestError::Malformed { line, message: "first line must be init_time=<ISO8601>".into() })?;
    let init_time = parse_timestamp(init, line)?;

    let mut out: Vec<EnsembleNwpForecast> = Vec::new();
    while let Some((line, block)) = lines.next() {
        let (variable, lead) = parse_block_header(block, line)?;
        if lead > MAX_LEAD_HOURS {
            return Err(IngestError::LeadOutOfRange { line, lead });
        }
        if out.iter().any(|f| f.variable == variable && f.lead_hours == lead) {
            return Err(IngestError::DuplicateBlock { line, variable, lead });
        }
        let (vline, values) = lines.next().ok_or_else(|| IngestError::Malformed {
            line,
            message: format!("block {variable} lead {lead} has no member line"),
        })?;
        let members = values
            .split(',')
            .map(|v| parse_value(v.trim(), vline))
            .collect::<Result<Vec<f64>, _>>()?;
        if members.len() != ENSEMBLE_SIZE {
            return Err(IngestError::MemberCount { line, variable, lead, found: members.len() });
        }
        out.push(EnsembleNwpForecast { variable, init_time, lead_hours: lead, members });
    }
    Ok(out)
}

fn parse_block_header(block: &str, line: u64) -> Result<(NwpVariable, u32), IngestError> {
    let malformed = || IngestError::Malformed { line, message: format!("expected `variable=<code> lead=<hours>`, found {block:?}") };
    let mut parts = block.split_whitespace();
    let code = parts.next().and_then(|p| p.strip_prefix("variable=")).ok_or_else(malformed)?;
    let lead = parts.next().and_then(|p| p.strip_prefix("lead=")).ok_or_else(malformed)?;
    if parts.next().is_some() {
        return Err(malformed());
    }
    let variable = code
        .parse::<NwpVariable>()
        .map_err(|code| IngestError::UnknownVariable { line, code })?;
    let lead: u32 = lead.parse().map_err(|_| malformed())?;
    Ok((variable, lead))
}

pub fn load_nwp_file(path: impl AsRef<Path>) -> Result<Vec<EnsembleNwpForecast>, IngestError> {
    parse_nwp(&read(path.as_ref())?)
}

pub fn write_nwp(forecasts: &[EnsembleNwpForecast]) -> String {
    let mut out = String::new();
    if let Some(first) = forecasts.first() {
        out.push_str(&format!("init_time={}\n", first.init_time.format("%Y-%m-%dT%H:%M:%SZ")));
    }
    for f in forecasts {
        out.push_str(&format!("variable={} lead={}\n", f.variable, f.lead_hours));
        let members: Vec<String> = f.members.iter().map(|m| m.to_string()).collect();
        out.push_str(&members.join(","));
        out.push('\n');
    }
    out
}

/// Weather station identity and the date its series replaced a previous
/// station's.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StationConfig {
    pub station_id: String,
    pub cutover: Option<NaiveDate>,
    /// Allow training windows to span the cutover.
    pub allow_mixing: bool,
}

impl StationConfig {
    /// Whether a training pair valid at `valid_time` may be used for a round
    /// on `round_date`.
    pub fn admits(&self, valid_time: DateTime<Utc>, round_date: NaiveDate) -> bool {
        match self.cutover {
            Some(cut) if !self.allow_mixing => {
                let cut_time = cut.and_time(NaiveTime::MIN).and_utc();
                (valid_time >= cut_time) == (round_date >= cut)
            }
            _ => true,
        }
    }
}
