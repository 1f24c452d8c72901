//! On-disk layout of a challenge store.
//!
//! ```text
//! <root>/
//!   config                        key = value settings
//!   state.json                    round calendar and states
//!   .lock                         present while a writer runs
//!   data/prices.csv
//!   data/observations/<target>.csv
//!   data/nwp/<YYYYMMDDHH>.txt     one file per initialization
//!   rounds/<date>/submissions/<alias>/<sha256>.csv
//!   rounds/<date>/submissions/index.json
//!   rounds/<date>/reports/<sha256>.json
//!   rounds/<date>/forecasts/<reserved alias>.csv
//!   rounds/<date>/emos/<target>_<lead>.txt
//!   rounds/<date>/skipped.json
//!   scores/<date>.csv
//!   leaderboard.json, leaderboard.csv
//!   analysis/*.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader sees either the old or the new version.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use qhub_core::TargetKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, HubConfig};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} is not a challenge store (no config file)")]
    NotAStore(PathBuf),
    #[error("{0} already holds a challenge store")]
    AlreadyInitialized(PathBuf),
    #[error("another writer holds {0}; remove it if no hub command is running")]
    Locked(PathBuf),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
}

pub fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundStatus {
    Open,
    Closed,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub status: RoundStatus,
    pub targets: Vec<TargetKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChallengeState {
    pub rounds: BTreeMap<NaiveDate, RoundEntry>,
}

/// One stored version of a participant's file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionVersion {
    pub sha256: String,
    pub source_name: String,
    pub accepted: bool,
    /// Parsed with non-monotone rows sorted rather than rejected.
    #[serde(default)]
    pub repaired: bool,
}

/// Per-round submission index: alias to versions in ingestion order. The
/// last accepted version is the one that counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmissionIndex {
    pub aliases: BTreeMap<String, Vec<SubmissionVersion>>,
}

impl SubmissionIndex {
    pub fn current(&self, alias: &str) -> Option<&SubmissionVersion> {
        self.aliases.get(alias)?.iter().rev().find(|v| v.accepted)
    }

    pub fn accepted_aliases(&self) -> impl Iterator<Item = &str> {
        self.aliases
            .iter()
            .filter(|(_, v)| v.iter().any(|x| x.accepted))
            .map(|(a, _)| a.as_str())
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Exclusive writer lock, released on drop.
#[derive(Debug)]
pub struct WriteLock {
    path: PathBuf,
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn init(root: impl Into<PathBuf>, config: &HubConfig) -> Result<Self, StoreError> {
        let store = Self::new(root);
        if store.config_path().exists() {
            return Err(StoreError::AlreadyInitialized(store.root.clone()));
        }
        fs::create_dir_all(&store.root).map_err(io_err(&store.root))?;
        atomic_write(&store.config_path(), config.to_text().as_bytes())?;
        store.save_state(&ChallengeState::default())?;
        Ok(store)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self::new(root);
        if !store.config_path().exists() {
            return Err(StoreError::NotAStore(store.root.clone()));
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn lock(&self) -> Result<WriteLock, StoreError> {
        let path = self.root.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WriteLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Locked(path)),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config")
    }

    pub fn config(&self) -> Result<HubConfig, StoreError> {
        Ok(HubConfig::parse(&read_to_string(&self.config_path())?)?)
    }

    pub fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }

    pub fn state(&self) -> Result<ChallengeState, StoreError> {
        read_json(&self.state_path())
    }

    pub fn save_state(&self, state: &ChallengeState) -> Result<(), StoreError> {
        atomic_write(&self.state_path(), to_json(state).as_bytes())
    }

    pub fn prices_path(&self) -> PathBuf {
        self.root.join("data").join("prices.csv")
    }

    pub fn observations_path(&self, target: TargetKind) -> PathBuf {
        self.root.join("data").join("observations").join(format!("{}.csv", target.label()))
    }

    pub fn nwp_dir(&self) -> PathBuf {
        self.root.join("data").join("nwp")
    }

    pub fn round_dir(&self, round: NaiveDate) -> PathBuf {
        self.root.join("rounds").join(round.to_string())
    }

    pub fn submissions_dir(&self, round: NaiveDate) -> PathBuf {
        self.round_dir(round).join("submissions")
    }

    pub fn submission_path(&self, round: NaiveDate, alias: &str, sha256: &str) -> PathBuf {
        self.submissions_dir(round).join(alias).join(format!("{sha256}.csv"))
    }

    pub fn submission_index(&self, round: NaiveDate) -> Result<SubmissionIndex, StoreError> {
        let path = self.submissions_dir(round).join("index.json");
        if path.exists() {
            read_json(&path)
        } else {
            Ok(SubmissionIndex::default())
        }
    }

    pub fn save_submission_index(&self, round: NaiveDate, index: &SubmissionIndex) -> Result<(), StoreError> {
        atomic_write(&self.submissions_dir(round).join("index.json"), to_json(index).as_bytes())
    }

    pub fn report_path(&self, round: NaiveDate, sha256: &str) -> PathBuf {
        self.round_dir(round).join("reports").join(format!("{sha256}.json"))
    }

    pub fn forecast_path(&self, round: NaiveDate, alias: &str) -> PathBuf {
        self.round_dir(round).join("forecasts").join(format!("{alias}.csv"))
    }

    pub fn emos_path(&self, round: NaiveDate, target: TargetKind, lead: u32) -> PathBuf {
        self.round_dir(round).join("emos").join(format!("{}_{lead}.txt", target.label()))
    }

    pub fn skipped_path(&self, round: NaiveDate) -> PathBuf {
        self.round_dir(round).join("skipped.json")
    }

    pub fn scores_path(&self, round: NaiveDate) -> PathBuf {
        self.root.join("scores").join(format!("{round}.csv"))
    }

    pub fn leaderboard_json_path(&self) -> PathBuf {
        self.root.join("leaderboard.json")
    }

    pub fn leaderboard_csv_path(&self) -> PathBuf {
        self.root.join("leaderboard.csv")
    }

    pub fn analysis_path(&self, name: &str) -> PathBuf {
        self.root.join("analysis").join(format!("{name}.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> HubConfig {
        HubConfig::parse("station_id = s\nseason_start = 2021-10-27\nseason_end = 2022-02-09\nseed = 1").unwrap()
    }

    #[test]
    fn init_open_and_lock() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::init(dir.path(), &config()).unwrap();
        assert!(matches!(Store::init(dir.path(), &config()), Err(StoreError::AlreadyInitialized(_))));
        assert_eq!(store.state().unwrap(), ChallengeState::default());
        assert_eq!(Store::open(dir.path()).unwrap().config().unwrap(), config());

        let lock = store.lock().unwrap();
        assert!(matches!(store.lock(), Err(StoreError::Locked(_))));
        drop(lock);
        assert!(store.lock().is_ok());

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(Store::open(empty.path()), Err(StoreError::NotAStore(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a").join("b.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn index_current_version() {
        let mut idx = SubmissionIndex::default();
        let v = |sha: &str, accepted| SubmissionVersion { sha256: sha.into(), source_name: "f.csv".into(), accepted, repaired: false };
        idx.aliases.insert("a".into(), vec![v("1", true), v("2", false)]);
        idx.aliases.insert("b".into(), vec![v("3", false)]);
        assert_eq!(idx.current("a").unwrap().sha256, "1");
        assert!(idx.current("b").is_none());
        assert_eq!(idx.accepted_aliases().collect::<Vec<_>>(), vec!["a"]);
    }
}
