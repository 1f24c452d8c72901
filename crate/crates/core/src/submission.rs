//! Submission files: the weekly CSV each forecaster hands in.
//!
//! ```text
//! forecast_date,target,horizon,q0.025,q0.25,q0.5,q0.75,q0.975
//! 2021-11-03,DAX,1 day,-1.8,-0.3,0.1,0.6,1.7
//! ```
//!
//! Parsing never stops at the first problem: every finding is collected into
//! a [`ValidationReport`] so a forecaster can fix the whole file at once.

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::Serialize;

use crate::domain::{check_quantiles, DomainError, Horizon, QuantileForecast, RoundSpec, TargetKind};

pub const HEADER: [&str; 8] = [
    "forecast_date",
    "target",
    "horizon",
    "q0.025",
    "q0.25",
    "q0.5",
    "q0.75",
    "q0.975",
];

/// Aliases under which organizer-generated forecasts are stored.
pub const RESERVED_ALIASES: [&str; 4] = ["benchmark", "emos", "ensemble_mean", "ensemble_median"];

pub fn is_reserved_alias(alias: &str) -> bool {
    RESERVED_ALIASES.contains(&alias)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Machine-readable finding codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    InvalidAlias,
    ReservedAlias,
    Encoding,
    EmptyFile,
    MalformedCsv,
    Header,
    FieldCount,
    DateFormat,
    DateMismatch,
    UnknownTarget,
    UnknownHorizon,
    DuplicateRow,
    MissingRow,
    NonNumeric,
    NonFinite,
    NonMonotone,
    InactiveTarget,
    NegativeWind,
    RepairedSort,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::InvalidAlias => "invalid_alias",
            FindingCode::ReservedAlias => "reserved_alias",
            FindingCode::Encoding => "encoding",
            FindingCode::EmptyFile => "empty_file",
            FindingCode::MalformedCsv => "malformed_csv",
            FindingCode::Header => "header",
            FindingCode::FieldCount => "field_count",
            FindingCode::DateFormat => "date_format",
            FindingCode::DateMismatch => "date_mismatch",
            FindingCode::UnknownTarget => "unknown_target",
            FindingCode::UnknownHorizon => "unknown_horizon",
            FindingCode::DuplicateRow => "duplicate_row",
            FindingCode::MissingRow => "missing_row",
            FindingCode::NonNumeric => "non_numeric",
            FindingCode::NonFinite => "non_finite",
            FindingCode::NonMonotone => "non_monotone",
            FindingCode::InactiveTarget => "inactive_target",
            FindingCode::NegativeWind => "negative_wind",
            FindingCode::RepairedSort => "repaired_sort",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One problem found in a submission. `line` is 1-based; 0 refers to the
/// file as a whole (e.g. a row that is missing entirely).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub line: u64,
    pub cell: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub alias: String,
    pub round_date: NaiveDate,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn new(alias: &str, round_date: NaiveDate) -> Self {
        Self { alias: alias.to_string(), round_date, findings: Vec::new() }
    }

    pub fn verdict(&self) -> Verdict {
        if self.errors().next().is_some() {
            Verdict::Rejected
        } else {
            Verdict::Accepted
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn codes(&self) -> Vec<FindingCode> {
        self.findings.iter().map(|f| f.code).collect()
    }

    fn push(&mut self, severity: Severity, code: FindingCode, line: u64, cell: Option<String>, message: String) {
        self.findings.push(Finding { severity, code, line, cell, message });
    }

    fn error(&mut self, code: FindingCode, line: u64, cell: Option<String>, message: impl Into<String>) {
        self.push(Severity::Error, code, line, cell, message.into());
    }

    fn warn(&mut self, code: FindingCode, line: u64, cell: Option<String>, message: impl Into<String>) {
        self.push(Severity::Warning, code, line, cell, message.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.verdict() {
            Verdict::Accepted => "accepted",
            Verdict::Rejected => "rejected",
        };
        writeln!(f, "{} ({}): {}", self.alias, self.round_date, verdict)?;
        for finding in &self.findings {
            let sev = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "  {sev} [{}] ", finding.code)?;
            if finding.line > 0 {
                write!(f, "line {}", finding.line)?;
            } else {
                write!(f, "file")?;
            }
            if let Some(cell) = &finding.cell {
                write!(f, " ({cell})")?;
            }
            writeln!(f, ": {}", finding.message)?;
        }
        Ok(())
    }
}

/// One forecaster's forecasts for one round, rows in file order
/// (DAX, temperature, wind; horizons ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct SubmissionFile {
    alias: String,
    round_date: NaiveDate,
    rows: Vec<QuantileForecast>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SubmissionError {
    #[error("row for {target} {horizon} has round date {found}, expected {expected}")]
    RoundMismatch { target: TargetKind, horizon: Horizon, found: NaiveDate, expected: NaiveDate },
    #[error("two rows for {0} {1}")]
    Duplicate(TargetKind, Horizon),
}

impl SubmissionFile {
    /// Builds a submission from rows in any order. The set of cells may be a
    /// subset of a round (organizer files can be partial).
    pub fn from_rows(
        alias: impl Into<String>,
        round_date: NaiveDate,
        mut rows: Vec<QuantileForecast>,
    ) -> Result<Self, SubmissionError> {
        if let Some(r) = rows.iter().find(|r| r.round_date() != round_date) {
            return Err(SubmissionError::RoundMismatch {
                target: r.target(),
                horizon: r.horizon(),
                found: r.round_date(),
                expected: round_date,
            });
        }
        rows.sort_by_key(|r| (r.target(), r.horizon()));
        if let Some(w) = rows.windows(2).find(|w| (w[0].target(), w[0].horizon()) == (w[1].target(), w[1].horizon())) {
            return Err(SubmissionError::Duplicate(w[0].target(), w[0].horizon()));
        }
        Ok(Self { alias: alias.into(), round_date, rows })
    }

    pub fn alias(&self) -> &str {
        &self.alias
    }

    pub fn round_date(&self) -> NaiveDate {
        self.round_date
    }

    pub fn rows(&self) -> &[QuantileForecast] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<QuantileForecast> {
        self.rows
    }

    pub fn get(&self, target: TargetKind, horizon: Horizon) -> Option<&QuantileForecast> {
        self.rows
            .binary_search_by_key(&(target, horizon), |r| (r.target(), r.horizon()))
            .ok()
            .map(|i| &self.rows[i])
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Sort non-monotone quantile rows instead of rejecting them (organizer use).
    pub repair_sort: bool,
    /// Permit the reserved organizer aliases.
    pub allow_reserved: bool,
    /// Do not require a row for every cell of the round.
    pub allow_partial: bool,
}

/// A successfully parsed submission together with any warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub submission: SubmissionFile,
    pub report: ValidationReport,
}

pub fn validate_alias(alias: &str) -> Result<(), String> {
    if alias.trim().is_empty() {
        return Err("alias is empty".into());
    }
    if alias.starts_with('.') || alias.chars().any(|c| c == '/' || c == '\\' || c.is_control()) {
        return Err(format!("alias {alias:?} contains characters not allowed in file names"));
    }
    Ok(())
}

/// Parses and validates a submission for `round`.
///
/// Returns every finding on failure; on success the report holds warnings only.
pub fn parse_submission(
    raw: &[u8],
    round: &RoundSpec,
    alias: &str,
    opts: &ParseOptions,
) -> Result<Parsed, ValidationReport> {
    let mut report = ValidationReport::new(alias, round.round_date());
    if let Err(msg) = validate_alias(alias) {
        report.error(FindingCode::InvalidAlias, 0, None, msg);
    } else if is_reserved_alias(alias) && !opts.allow_reserved {
        report.error(FindingCode::ReservedAlias, 0, None, format!("alias {alias:?} is reserved for organizer forecasts"));
    }

    let text = match std::str::from_utf8(raw) {
        Ok(t) => t.strip_prefix('\u{feff}').unwrap_or(t),
        Err(e) => {
            report.error(FindingCode::Encoding, 0, None, format!("file is not valid UTF-8: {e}"));
            return Err(report);
        }
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    let mut seen: BTreeSet<(TargetKind, Horizon)> = BTreeSet::new();
    let mut header_checked = false;

    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                report.error(FindingCode::MalformedCsv, line, None, format!("unreadable CSV record: {e}"));
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if !header_checked {
            header_checked = true;
            let fields: Vec<&str> = record.iter().collect();
            if fields == HEADER {
                continue;
            }
            let looks_like_data = fields.first().is_some_and(|f| parse_date(f).is_some());
            report.error(
                FindingCode::Header,
                line,
                None,
                format!("header must be `{}`, found `{}`", HEADER.join(","), fields.join(",")),
            );
            if !looks_like_data {
                continue;
            }
        }
        if let Some(row) = parse_row(&record, line, round, opts, &mut seen, &mut report) {
            rows.push(row);
        }
    }

    if !header_checked {
        report.error(FindingCode::EmptyFile, 0, None, "file contains no header and no rows");
    } else if !opts.allow_partial {
        for (target, horizon) in round.cells() {
            if !seen.contains(&(target, horizon)) {
                report.error(
                    FindingCode::MissingRow,
                    0,
                    Some(cell_label(target, horizon)),
                    format!("no row for {target} {horizon}"),
                );
            }
        }
    }

    report.findings.sort_by_key(|f| f.line);
    if report.verdict() == Verdict::Rejected {
        return Err(report);
    }
    let submission = SubmissionFile::from_rows(alias, round.round_date(), rows)
        .expect("rows were checked for round date and duplicates");
    Ok(Parsed { submission, report })
}

fn cell_label(target: TargetKind, horizon: Horizon) -> String {
    format!("{target}/{horizon}")
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn parse_row(
    record: &csv::StringRecord,
    line: u64,
    round: &RoundSpec,
    opts: &ParseOptions,
    seen: &mut BTreeSet<(TargetKind, Horizon)>,
    report: &mut ValidationReport,
) -> Option<QuantileForecast> {
    if record.len() != HEADER.len() {
        report.error(
            FindingCode::FieldCount,
            line,
            None,
            format!("expected {} fields, found {} (decimal separator must be '.')", HEADER.len(), record.len()),
        );
        return None;
    }
    let mut ok = true;

    match parse_date(&record[0]) {
        None => {
            report.error(FindingCode::DateFormat, line, None, format!("forecast_date {:?} is not YYYY-MM-DD", &record[0]));
            ok = false;
        }
        Some(d) if d != round.round_date() => {
            report.error(
                FindingCode::DateMismatch,
                line,
                None,
                format!("forecast_date {d} does not match round {}", round.round_date()),
            );
            ok = false;
        }
        Some(_) => {}
    }

    let target: Option<TargetKind> = match record[1].parse() {
        Ok(t) => Some(t),
        Err(_) => {
            report.error(FindingCode::UnknownTarget, line, None, format!("unknown target {:?}", &record[1]));
            None
        }
    };
    let horizon = record[2].parse::<Horizon>().ok();
    let cell = match (target, horizon) {
        (Some(t), Some(h)) if t.has_horizon(h) => Some((t, h)),
        (Some(t), _) => {
            let allowed: Vec<String> = t.horizons().iter().map(|h| h.label()).collect();
            report.error(
                FindingCode::UnknownHorizon,
                line,
                None,
                format!("horizon {:?} is not one of {} for {t}", &record[2], allowed.join(", ")),
            );
            None
        }
        (None, _) => None,
    };
    let locator = cell.map(|(t, h)| cell_label(t, h));

    if let Some((t, h)) = cell {
        if !round.covers(t) {
            report.warn(
                FindingCode::InactiveTarget,
                line,
                locator,
                format!("{t} is not forecast in round {}; row ignored", round.round_date()),
            );
            return None;
        }
        if !seen.insert((t, h)) {
            report.error(FindingCode::DuplicateRow, line, locator.clone(), format!("second row for {t} {h}"));
            ok = false;
        }
    } else {
        ok = false;
    }

    let mut quantiles = [0.0; 5];
    let mut numeric = true;
    for (i, q) in quantiles.iter_mut().enumerate() {
        let field = &record[3 + i];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => *q = v,
            Ok(_) => {
                report.error(FindingCode::NonFinite, line, locator.clone(), format!("{} value {field:?} is not finite", HEADER[3 + i]));
                numeric = false;
            }
            Err(_) => {
                report.error(FindingCode::NonNumeric, line, locator.clone(), format!("{} value {field:?} is not a number", HEADER[3 + i]));
                numeric = false;
            }
        }
    }
    if !numeric {
        return None;
    }

    if let Err(DomainError::NonMonotone { index }) = check_quantiles(&quantiles) {
        if opts.repair_sort {
            quantiles.sort_by(f64::total_cmp);
            report.warn(FindingCode::RepairedSort, line, locator.clone(), "quantiles were not non-decreasing and have been sorted");
        } else {
            report.error(
                FindingCode::NonMonotone,
                line,
                locator.clone(),
                format!("{} exceeds {}", HEADER[2 + index], HEADER[3 + index]),
            );
            ok = false;
        }
    }

    let (target, horizon) = cell?;
    if target.is_nonnegative() && quantiles.iter().any(|&q| q < 0.0) {
        report.warn(FindingCode::NegativeWind, line, locator, "negative wind speed quantile; floored at 0 when scored");
    }
    if !ok {
        return None;
    }
    QuantileForecast::new(target, horizon, round.round_date(), quantiles).ok()
}

/// Renders a submission in the canonical file layout with LF line endings.
pub fn serialize_submission(sub: &SubmissionFile) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for row in &sub.rows {
        out.push_str(&format!("{},{},{}", sub.round_date.format("%Y-%m-%d"), row.target(), row.horizon()));
        for q in row.quantiles() {
            out.push_str(&format!(",{q}"));
        }
        out.push('\n');
    }
    out
}

/// `<YYYYMMDD>_<alias>.csv`
pub fn submission_filename(round_date: NaiveDate, alias: &str) -> String {
    format!("{}_{alias}.csv", round_date.format("%Y%m%d"))
}

/// Splits a file name following `<YYYYMMDD>_<alias>.csv` into its parts.
pub fn parse_submission_filename(name: &str) -> Option<(NaiveDate, String)> {
    let stem = name.strip_suffix(".csv")?;
    let (date, alias) = stem.split_once('_')?;
    if date.len() != 8 || !date.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let date = NaiveDate::parse_from_str(date, "%Y%m%d").ok()?;
    validate_alias(alias).ok()?;
    Some((date, alias.to_string()))
}
