//! `key = value` challenge configuration.

use chrono::NaiveDate;
use qhub_core::ingest::StationConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {0}: expected key = value")]
    Syntax(usize),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("missing required key {0}")]
    Missing(&'static str),
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubConfig {
    pub station: StationConfig,
    pub season_start: NaiveDate,
    pub season_end: NaiveDate,
    /// First round that includes the weather targets.
    pub weather_start: NaiveDate,
    pub seed: u64,
    pub dax_window: usize,
    pub emos_min_train: usize,
    /// Restrict EMOS training to initializations at most this many days
    /// before the round. `None` uses all history.
    pub emos_training_days: Option<u32>,
    pub ensemble_min_members: usize,
}

impl HubConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut station_id = None;
        let mut cutover = None;
        let mut allow_mixing = false;
        let mut season_start = None;
        let mut season_end = None;
        let mut weather_start = None;
        let mut seed = None;
        let mut dax_window = 1000;
        let mut emos_min_train = qhub_core::benchmarks::MIN_TRAINING_PAIRS;
        let mut emos_training_days = None;
        let mut ensemble_min_members = 1;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(line_no))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue { line: line_no, key: key.to_string(), value: value.to_string() };
            let date = || value.parse::<NaiveDate>().map_err(|_| bad());
            match key {
                "station_id" => station_id = Some(value.to_string()),
                "station_cutover" => cutover = if value.is_empty() { None } else { Some(date()?) },
                "allow_station_mixing" => allow_mixing = value.parse().map_err(|_| bad())?,
                "season_start" => season_start = Some(date()?),
                "season_end" => season_end = Some(date()?),
                "weather_start" => weather_start = Some(date()?),
                "seed" => seed = Some(value.parse().map_err(|_| bad())?),
                "dax_window" => dax_window = value.parse().map_err(|_| bad())?,
                "emos_min_train" => emos_min_train = value.parse().map_err(|_| bad())?,
                "emos_training_days" => {
                    emos_training_days = if value.is_empty() { None } else { Some(value.parse().map_err(|_| bad())?) }
                }
                "ensemble_min_members" => ensemble_min_members = value.parse().map_err(|_| bad())?,
                other => return Err(ConfigError::UnknownKey { line: line_no, key: other.to_string() }),
            }
        }

        let season_start = season_start.ok_or(ConfigError::Missing("season_start"))?;
        let season_end = season_end.ok_or(ConfigError::Missing("season_end"))?;
        let cfg = HubConfig {
            station: StationConfig {
                station_id: station_id.ok_or(ConfigError::Missing("station_id"))?,
                cutover,
                allow_mixing,
            },
            season_start,
            season_end,
            weather_start: weather_start.unwrap_or(season_start),
            seed: seed.ok_or(ConfigError::Missing("seed"))?,
            dax_window,
            emos_min_train,
            emos_training_days,
            ensemble_min_members,
        };
        if cfg.season_end < cfg.season_start {
            return Err(ConfigError::Inconsistent("season_end precedes season_start".into()));
        }
        if cfg.dax_window == 0 || cfg.ensemble_min_members == 0 {
            return Err(ConfigError::Inconsistent("dax_window and ensemble_min_members must be positive".into()));
        }
        if cfg.emos_min_train < qhub_core::benchmarks::MIN_TRAINING_PAIRS {
            return Err(ConfigError::Inconsistent(format!(
                "emos_min_train must be at least {}",
                qhub_core::benchmarks::MIN_TRAINING_PAIRS
            )));
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("station_id = {}\n", self.station.station_id);
        if let Some(c) = self.station.cutover {
            out.push_str(&format!("station_cutover = {c}\n"));
        }
        out.push_str(&format!("allow_station_mixing = {}\n", self.station.allow_mixing));
        out.push_str(&format!("season_start = {}\n", self.season_start));
        out.push_str(&format!("season_end = {}\n", self.season_end));
        out.push_str(&format!("weather_start = {}\n", self.weather_start));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("dax_window = {}\n", self.dax_window));
        out.push_str(&format!("emos_min_train = {}\n", self.emos_min_train));
        if let Some(d) = self.emos_training_days {
            out.push_str(&format!("emos_training_days = {d}\n"));
        }
        out.push_str(&format!("ensemble_min_members = {}\n", self.ensemble_min_members));
        out
    }
}
