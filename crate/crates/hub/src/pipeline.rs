//! Challenge lifecycle: rounds, data loading, submission intake and scoring.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Utc, Weekday};
use qhub_core::benchmarks::{
    dax_benchmark, emos_fit, emos_forecast, raw_ensemble_benchmark, EmosFamily, FitSettings, RollingWindowConfig,
    TrainingPair,
};
use qhub_core::ensemble::{combine, EnsembleMethod, EnsembleSpec};
use qhub_core::ingest::{
    dax_observation, load_nwp_file, load_observations, load_prices, write_nwp, write_observations, write_prices,
    EnsembleNwpForecast, IngestError, NwpVariable, ObservationSeries, PriceSeries,
};
use qhub_core::scoring::{records_from_csv, records_to_csv, score_forecast, ScoreRecord, ScoringError};
use qhub_core::submission::{
    is_reserved_alias, parse_submission, parse_submission_filename, serialize_submission, ParseOptions,
    SubmissionFile, ValidationReport,
};
use qhub_core::{resolve_valid_time, DomainError, Horizon, QuantileForecast, RoundSpec, TargetKind};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::HubConfig;
use crate::store::{
    atomic_write, io_err, read_to_string, to_json, RoundEntry, RoundStatus, Store, StoreError, SubmissionVersion,
    WriteLock,
};

#[derive(Debug, Error)]
pub enum HubError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Ranking(#[from] qhub_core::ranking::RankingError),
    #[error("{0} is not a Wednesday")]
    NotWednesday(NaiveDate),
    #[error("{date} lies outside the season {start} to {end}")]
    OutOfSeason { date: NaiveDate, start: NaiveDate, end: NaiveDate },
    #[error("round {0} already exists")]
    DuplicateRound(NaiveDate),
    #[error("round {0} has not been opened")]
    UnknownRound(NaiveDate),
    #[error("round {0} is already scored and no longer takes submissions")]
    RoundScored(NaiveDate),
    #[error("no observations available for any cell of round {0}")]
    NoObservations(NaiveDate),
    #[error("stored forecast {path} failed to parse: {message}")]
    StoredForecast { path: PathBuf, message: String },
}

pub type Result<T, E = HubError> = std::result::Result<T, E>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outcome of ingesting one file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FileOutcome {
    Accepted { alias: String, sha256: String, warnings: usize },
    Duplicate { alias: String, sha256: String },
    Rejected { alias: String, sha256: String, codes: Vec<String> },
    Skipped { reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub files: BTreeMap<String, FileOutcome>,
}

impl IngestSummary {
    pub fn accepted(&self) -> Vec<&str> {
        self.files
            .values()
            .filter_map(|o| match o {
                FileOutcome::Accepted { alias, .. } => Some(alias.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn rejected(&self) -> Vec<&str> {
        self.files
            .values()
            .filter_map(|o| match o {
                FileOutcome::Rejected { alias, .. } => Some(alias.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// A cell for which some forecaster or the observation is unavailable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SkippedCell {
    pub target: TargetKind,
    pub horizon: Horizon,
    /// Affected forecaster, or `None` when the observation is missing.
    pub alias: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub round_date: NaiveDate,
    pub observed_cells: usize,
    pub records: usize,
    pub skipped: Vec<SkippedCell>,
}

/// Reference forecasters computed by the organizers, in display order.
pub const REFERENCE_ALIASES: [&str; 4] = ["benchmark", "emos", "ensemble_mean", "ensemble_median"];

pub struct Hub {
    store: Store,
    config: HubConfig,
}

impl Hub {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let store = Store::open(root)?;
        let config = store.config()?;
        Ok(Self { store, config })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn lock(&self) -> Result<WriteLock> {
        Ok(self.store.lock()?)
    }

    pub fn round_spec(&self, date: NaiveDate) -> Result<RoundSpec> {
        let state = self.store.state()?;
        let entry = state.rounds.get(&date).ok_or(HubError::UnknownRound(date))?;
        Ok(RoundSpec::new(date, &entry.targets)?)
    }

    /// Targets forecast in a round on `date` under this season's calendar.
    pub fn targets_for(&self, date: NaiveDate) -> Vec<TargetKind> {
        TargetKind::ALL
            .into_iter()
            .filter(|t| !t.is_weather() || date >= self.config.weather_start)
            .collect()
    }

    pub fn open_round(&self, date: NaiveDate) -> Result<RoundSpec> {
        if date.weekday() != Weekday::Wed {
            return Err(HubError::NotWednesday(date));
        }
        if date < self.config.season_start || date > self.config.season_end {
            return Err(HubError::OutOfSeason { date, start: self.config.season_start, end: self.config.season_end });
        }
        let mut state = self.store.state()?;
        if state.rounds.contains_key(&date) {
            return Err(HubError::DuplicateRound(date));
        }
        let targets = self.targets_for(date);
        let spec = RoundSpec::new(date, &targets)?;
        state.rounds.insert(date, RoundEntry { status: RoundStatus::Open, targets: spec.targets().to_vec() });
        self.store.save_state(&state)?;
        Ok(spec)
    }

    fn set_status(&self, date: NaiveDate, status: RoundStatus) -> Result<()> {
        let mut state = self.store.state()?;
        let entry = state.rounds.get_mut(&date).ok_or(HubError::UnknownRound(date))?;
        if entry.status != status {
            entry.status = status;
            self.store.save_state(&state)?;
        }
        Ok(())
    }

    // ---- data -----------------------------------------------------------

    pub fn prices(&self) -> Result<Option<PriceSeries>> {
        let path = self.store.prices_path();
        Ok(if path.exists() { Some(load_prices(&path)?) } else { None })
    }

    pub fn observations(&self, target: TargetKind) -> Result<ObservationSeries> {
        let path = self.store.observations_path(target);
        Ok(if path.exists() { load_observations(&path, target)? } else { ObservationSeries::new(target)? })
    }

    pub fn nwp_forecasts(&self) -> Result<Vec<EnsembleNwpForecast>> {
        let dir = self.store.nwp_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for path in sorted_files(&dir)? {
            out.extend(load_nwp_file(&path)?);
        }
        Ok(out)
    }

    /// Merges a price file into the store; returns the number of closes read.
    pub fn load_prices(&self, path: &Path) -> Result<usize> {
        let incoming = load_prices(path)?;
        let mut series = self.prices()?.unwrap_or_else(|| incoming.clone());
        series.merge(&incoming);
        atomic_write(&self.store.prices_path(), write_prices(&series).as_bytes())?;
        Ok(incoming.len())
    }

    pub fn load_observations(&self, target: TargetKind, path: &Path) -> Result<usize> {
        let incoming = load_observations(path, target)?;
        let mut series = self.observations(target)?;
        series.merge(&incoming);
        atomic_write(&self.store.observations_path(target), write_observations(&series).as_bytes())?;
        Ok(incoming.len())
    }

    /// Loads one NWP file or every file in a directory.
    pub fn load_nwp(&self, path: &Path) -> Result<usize> {
        let files = if path.is_dir() { sorted_files(path)? } else { vec![path.to_path_buf()] };
        let mut count = 0;
        for file in files {
            let incoming = load_nwp_file(&file)?;
            let Some(first) = incoming.first() else { continue };
            let target = self.store.nwp_dir().join(format!("{}.txt", first.init_time.format("%Y%m%d%H")));
            let mut blocks: BTreeMap<(NwpVariable, u32), EnsembleNwpForecast> = BTreeMap::new();
            if target.exists() {
                for f in load_nwp_file(&target)? {
                    blocks.insert((f.variable, f.lead_hours), f);
                }
            }
            count += incoming.len();
            for f in incoming {
                blocks.insert((f.variable, f.lead_hours), f);
            }
            let merged: Vec<EnsembleNwpForecast> = blocks.into_values().collect();
            atomic_write(&target, write_nwp(&merged).as_bytes())?;
        }
        Ok(count)
    }

    // ---- submissions ----------------------------------------------------

    /// Validates one file and, if accepted, stores it under its content hash.
    pub fn ingest_file(&self, round: &RoundSpec, name: &str, raw: &[u8], repair_sort: bool) -> Result<FileOutcome> {
        let Some((date, alias)) = parse_submission_filename(name) else {
            return Ok(FileOutcome::Skipped { reason: "file name does not match <YYYYMMDD>_<alias>.csv".into() });
        };
        if date != round.round_date() {
            return Ok(FileOutcome::Skipped { reason: format!("file name dates it to {date}") });
        }
        let date = round.round_date();
        let sha256 = sha256_hex(raw);
        let mut index = self.store.submission_index(date)?;
        // Identical bytes are only worth re-checking under different parse options.
        let seen = |v: &SubmissionVersion| v.sha256 == sha256 && v.repaired == repair_sort;
        if index.aliases.get(&alias).is_some_and(|vs| vs.iter().any(seen)) {
            return Ok(FileOutcome::Duplicate { alias, sha256 });
        }

        let opts = ParseOptions { repair_sort, ..Default::default() };
        let (accepted, report) = match parse_submission(raw, round, &alias, &opts) {
            Ok(parsed) => (true, parsed.report),
            Err(report) => (false, report),
        };
        if accepted {
            let path = self.store.submission_path(date, &alias, &sha256);
            if !path.exists() {
                atomic_write(&path, raw)?;
            }
        }
        atomic_write(&self.store.report_path(date, &sha256), to_json(&report).as_bytes())?;
        index.aliases.entry(alias.clone()).or_default().push(SubmissionVersion {
            sha256: sha256.clone(),
            source_name: name.to_string(),
            accepted,
            repaired: repair_sort,
        });
        self.store.save_submission_index(date, &index)?;

        Ok(if accepted {
            FileOutcome::Accepted { alias, sha256, warnings: report.warnings().count() }
        } else {
            let codes = report.errors().map(|f| f.code.as_str().to_string()).collect();
            FileOutcome::Rejected { alias, sha256, codes }
        })
    }

    pub fn ingest_directory(&self, date: NaiveDate, dir: &Path, repair_sort: bool) -> Result<IngestSummary> {
        let state = self.store.state()?;
        let entry = state.rounds.get(&date).ok_or(HubError::UnknownRound(date))?;
        if entry.status == RoundStatus::Scored {
            return Err(HubError::RoundScored(date));
        }
        let round = RoundSpec::new(date, &entry.targets)?;
        let mut summary = IngestSummary::default();
        for path in sorted_files(dir)? {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let raw = fs::read(&path).map_err(|e| StoreError::Io { path: path.clone(), source: e })?;
            let outcome = self.ingest_file(&round, &name, &raw, repair_sort)?;
            summary.files.insert(name, outcome);
        }
        Ok(summary)
    }

    /// Current accepted submissions of a round, keyed by alias.
    pub fn submissions(&self, round: &RoundSpec) -> Result<BTreeMap<String, SubmissionFile>> {
        let date = round.round_date();
        let index = self.store.submission_index(date)?;
        let mut out = BTreeMap::new();
        for alias in index.accepted_aliases() {
            let version = index.current(alias).expect("accepted alias has a current version");
            let path = self.store.submission_path(date, alias, &version.sha256);
            let raw = fs::read(&path).map_err(io_err(&path))?;
            let opts = ParseOptions { repair_sort: version.repaired, ..Default::default() };
            let parsed = parse_submission(&raw, round, alias, &opts)
                .map_err(|r| HubError::StoredForecast { path: path.clone(), message: report_summary(&r) })?;
            out.insert(alias.to_string(), parsed.submission);
        }
        Ok(out)
    }

    /// Organizer forecasts stored for a round, keyed by alias.
    pub fn reference_forecasts(&self, round: &RoundSpec) -> Result<BTreeMap<String, SubmissionFile>> {
        let mut out = BTreeMap::new();
        for alias in REFERENCE_ALIASES {
            let path = self.store.forecast_path(round.round_date(), alias);
            if path.exists() {
                out.insert(alias.to_string(), self.read_reference(round, alias, &path)?);
            }
        }
        Ok(out)
    }

    fn read_reference(&self, round: &RoundSpec, alias: &str, path: &Path) -> Result<SubmissionFile> {
        let raw = fs::read(path).map_err(io_err(path))?;
        let opts = ParseOptions { allow_reserved: true, allow_partial: true, ..Default::default() };
        parse_submission(&raw, round, alias, &opts)
            .map(|p| p.submission)
            .map_err(|r| HubError::StoredForecast { path: path.to_path_buf(), message: report_summary(&r) })
    }

    // ---- scoring --------------------------------------------------------

    fn emos_for_cell(
        &self,
        round: &RoundSpec,
        target: TargetKind,
        horizon: Horizon,
        current: &EnsembleNwpForecast,
        nwp: &[EnsembleNwpForecast],
        observations: &ObservationSeries,
    ) -> std::result::Result<QuantileForecast, String> {
        let round_start = midnight(round.round_date());
        let earliest = self.config.emos_training_days.map(|d| round_start - Duration::days(d.into()));
        let training: Vec<TrainingPair> = nwp
            .iter()
            .filter(|f| f.variable == current.variable && f.lead_hours == current.lead_hours)
            .filter(|f| f.init_time < round_start && f.valid_time() <= round_start)
            .filter(|f| earliest.is_none_or(|e| f.init_time >= e))
            .filter(|f| self.config.station.admits(f.valid_time(), round.round_date()))
            .filter_map(|f| {
                observations
                    .value(f.valid_time())
                    .map(|obs| TrainingPair { ens_mean: f.mean(), ens_var: f.variance(), obs })
            })
            .collect();
        if training.len() < self.config.emos_min_train {
            return Err(format!("EMOS needs {} training pairs, found {}", self.config.emos_min_train, training.len()));
        }
        let family = EmosFamily::for_target(target).map_err(|e| e.to_string())?;
        let fit = emos_fit(&training, family, &FitSettings::default()).map_err(|e| e.to_string())?;
        let mut params = fit.params;
        params.training_window_days = self.config.emos_training_days;
        params.fitted_at = Some(round.round_date());
        let path = self.store.emos_path(round.round_date(), target, horizon.magnitude);
        atomic_write(&path, params.to_kv().as_bytes()).map_err(|e| e.to_string())?;
        emos_forecast(&params, target, horizon, round.round_date(), current.mean(), current.variance())
            .map_err(|e| e.to_string())
    }

    /// Computes organizer forecasts that are not stored yet. Stored cells are
    /// kept as they are.
    fn build_references(
        &self,
        round: &RoundSpec,
        participants: &BTreeMap<String, SubmissionFile>,
        skipped: &mut Vec<SkippedCell>,
    ) -> Result<BTreeMap<String, SubmissionFile>> {
        let date = round.round_date();
        let existing = self.reference_forecasts(round)?;
        let mut rows: BTreeMap<&str, BTreeMap<(TargetKind, Horizon), QuantileForecast>> = BTreeMap::new();
        for (alias, sub) in &existing {
            let alias = REFERENCE_ALIASES.into_iter().find(|a| a == alias).expect("reference alias");
            rows.insert(alias, sub.rows().iter().map(|r| ((r.target(), r.horizon()), r.clone())).collect());
        }
        let has = |rows: &BTreeMap<&str, BTreeMap<_, _>>, alias: &str, cell| rows.get(alias).is_some_and(|m| m.contains_key(&cell));
        let mut skip = |target, horizon, alias: &str, reason: String| {
            skipped.push(SkippedCell { target, horizon, alias: Some(alias.to_string()), reason })
        };

        if round.covers(TargetKind::Dax) {
            let missing: Vec<Horizon> = TargetKind::Dax
                .horizons()
                .iter()
                .copied()
                .filter(|&h| !has(&rows, "benchmark", (TargetKind::Dax, h)))
                .collect();
            if !missing.is_empty() {
                let cfg = RollingWindowConfig { window_length: self.config.dax_window };
                match self.prices()?.map(|p| dax_benchmark(&p, round, &cfg)) {
                    Some(Ok(forecasts)) => {
                        for f in forecasts.into_iter().filter(|f| missing.contains(&f.horizon())) {
                            rows.entry("benchmark").or_default().insert((f.target(), f.horizon()), f);
                        }
                    }
                    Some(Err(e)) => missing.iter().for_each(|&h| skip(TargetKind::Dax, h, "benchmark", e.to_string())),
                    None => missing.iter().for_each(|&h| skip(TargetKind::Dax, h, "benchmark", "no prices loaded".into())),
                }
            }
        }

        let weather: Vec<TargetKind> = round.targets().iter().copied().filter(|t| t.is_weather()).collect();
        if !weather.is_empty() {
            let nwp = self.nwp_forecasts()?;
            let round_start = midnight(date);
            for target in weather {
                let variable = NwpVariable::for_target(target).expect("weather target has an NWP variable");
                let observations = self.observations(target)?;
                for &horizon in target.horizons() {
                    let cell = (target, horizon);
                    let need_bench = !has(&rows, "benchmark", cell);
                    let need_emos = !has(&rows, "emos", cell);
                    if !need_bench && !need_emos {
                        continue;
                    }
                    let current = nwp
                        .iter()
                        .find(|f| f.variable == variable && f.init_time == round_start && f.lead_hours == horizon.magnitude);
                    let Some(current) = current else {
                        let reason = format!("no {variable} ensemble initialized {round_start} at lead {}", horizon.magnitude);
                        if need_bench {
                            skip(target, horizon, "benchmark", reason.clone());
                        }
                        if need_emos {
                            skip(target, horizon, "emos", reason);
                        }
                        continue;
                    };
                    if need_bench {
                        match raw_ensemble_benchmark(current, target) {
                            Ok(f) => {
                                rows.entry("benchmark").or_default().insert(cell, f);
                            }
                            Err(e) => skip(target, horizon, "benchmark", e.to_string()),
                        }
                    }
                    if need_emos {
                        match self.emos_for_cell(round, target, horizon, current, &nwp, &observations) {
                            Ok(f) => {
                                rows.entry("emos").or_default().insert(cell, f);
                            }
                            Err(reason) => skip(target, horizon, "emos", reason),
                        }
                    }
                }
            }
        }

        // Ensembles are rebuilt from the current accepted submissions.
        let spec_for = |method| EnsembleSpec {
            method,
            member_aliases: participants.keys().cloned().collect(),
            min_members: self.config.ensemble_min_members,
        };
        for method in [EnsembleMethod::Mean, EnsembleMethod::Median] {
            let spec = spec_for(method);
            let mut cells = BTreeMap::new();
            for (target, horizon) in round.cells() {
                let members: Vec<QuantileForecast> =
                    participants.values().filter_map(|s| s.get(target, horizon)).cloned().collect();
                match combine(&members, &spec) {
                    Ok(f) => {
                        cells.insert((target, horizon), f);
                    }
                    Err(e) => skip(target, horizon, method.alias(), e.to_string()),
                }
            }
            rows.insert(method.alias(), cells);
        }

        let mut out = BTreeMap::new();
        for (alias, cells) in rows {
            if cells.is_empty() {
                continue;
            }
            let sub = SubmissionFile::from_rows(alias, date, cells.into_values().collect())
                .expect("cells are unique and share the round date");
            atomic_write(&self.store.forecast_path(date, alias), serialize_submission(&sub).as_bytes())?;
            out.insert(alias.to_string(), sub);
        }
        Ok(out)
    }

    /// Realized value for each cell of the round, `None` where unavailable.
    pub fn round_observations(&self, round: &RoundSpec) -> Result<BTreeMap<(TargetKind, Horizon), (DateTime<Utc>, Option<f64>)>> {
        let prices = if round.covers(TargetKind::Dax) { self.prices()? } else { None };
        let mut series = BTreeMap::new();
        for &t in round.targets().iter().filter(|t| t.is_weather()) {
            series.insert(t, self.observations(t)?);
        }
        let mut out = BTreeMap::new();
        for (target, horizon) in round.cells() {
            let valid_time = resolve_valid_time(round, target, horizon)?;
            let value = if target == TargetKind::Dax {
                match &prices {
                    Some(p) => match dax_observation(p, round, horizon) {
                        Ok(obs) => obs.value(),
                        Err(IngestError::NoAnchor(_)) => None,
                        Err(e) => return Err(e.into()),
                    },
                    None => None,
                }
            } else {
                series[&target].value(valid_time)
            };
            out.insert((target, horizon), (valid_time, value));
        }
        Ok(out)
    }

    /// Builds reference forecasts, scores every forecaster on every cell
    /// with an observation, and marks the round scored. Re-running gives the
    /// same records.
    pub fn score_round(&self, date: NaiveDate) -> Result<ScoreSummary> {
        let round = self.round_spec(date)?;
        self.set_status_at_least(date, RoundStatus::Closed)?;

        let participants = self.submissions(&round)?;
        let mut skipped = Vec::new();
        let references = self.build_references(&round, &participants, &mut skipped)?;
        let observations = self.round_observations(&round)?;

        let mut records = Vec::new();
        let mut observed_cells = 0;
        for (&(target, horizon), &(_, value)) in &observations {
            let Some(y) = value else {
                skipped.push(SkippedCell { target, horizon, alias: None, reason: "observation missing".into() });
                continue;
            };
            observed_cells += 1;
            for (alias, sub) in participants.iter().chain(references.iter()) {
                if let Some(f) = sub.get(target, horizon) {
                    records.push(score_forecast(alias, f, y)?);
                }
            }
        }
        if observed_cells == 0 {
            return Err(HubError::NoObservations(date));
        }
        records.sort_by(|a, b| (&a.participant, a.target, a.horizon).cmp(&(&b.participant, b.target, b.horizon)));
        skipped.sort();

        atomic_write(&self.store.scores_path(date), records_to_csv(&records).as_bytes())?;
        atomic_write(&self.store.skipped_path(date), to_json(&skipped).as_bytes())?;
        self.set_status(date, RoundStatus::Scored)?;
        Ok(ScoreSummary { round_date: date, observed_cells, records: records.len(), skipped })
    }

    fn set_status_at_least(&self, date: NaiveDate, status: RoundStatus) -> Result<()> {
        let state = self.store.state()?;
        let entry = state.rounds.get(&date).ok_or(HubError::UnknownRound(date))?;
        if entry.status < status {
            self.set_status(date, status)?;
        }
        Ok(())
    }

    /// Score records of every scored round, in round order.
    pub fn all_records(&self) -> Result<Vec<ScoreRecord>> {
        let state = self.store.state()?;
        let mut out = Vec::new();
        for (&date, entry) in &state.rounds {
            if entry.status == RoundStatus::Scored {
                out.extend(records_from_csv(&read_to_string(&self.store.scores_path(date))?)?);
            }
        }
        Ok(out)
    }
}

pub fn midnight(date: NaiveDate) -> DateTime<Utc> {
    date.and_time(NaiveTime::MIN).and_utc()
}

fn report_summary(report: &ValidationReport) -> String {
    report.errors().map(|f| f.message.clone()).collect::<Vec<_>>().join("; ")
}

pub fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

/// Aliases that are participants rather than organizer forecasts.
pub fn is_participant(alias: &str) -> bool {
    !is_reserved_alias(alias)
}
