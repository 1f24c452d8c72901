mod common;

use std::fs;

use chrono::NaiveDate;
use qhub::pipeline::{FileOutcome, HubError};
use qhub::store::{RoundStatus, StoreError};
use qhub_core::TargetKind;

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

#[test]
fn season_scores_every_cell_with_an_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::run_season(dir.path());
    let p = hub.publish().unwrap();

    assert_eq!(p.sample_count.total, 199);
    assert_eq!(p.sample_count.by_target[&TargetKind::Dax], 69);
    assert_eq!(p.sample_count.by_target[&TargetKind::Temperature], 65);
    assert_eq!(p.sample_count.by_target[&TargetKind::Wind], 65);
    assert_eq!(p.leaderboard.scored_rounds.len(), 14);

    // The 7-day close of the last pre-holiday round does not exist.
    let skipped: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(hub.store().skipped_path(date("2021-12-22"))).unwrap()).unwrap();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0]["horizon"], "7 day");

    let state = hub.store().state().unwrap();
    assert!(state.rounds.values().all(|e| e.status == RoundStatus::Scored));
    assert_eq!(state.rounds[&date("2021-10-27")].targets, vec![TargetKind::Dax]);
}

#[test]
fn participation_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::loaded_store(dir.path());
    let round = hub.open_round(date("2021-12-08")).unwrap();
    let summary = hub
        .ingest_directory(round.round_date(), &common::fixture().join("submissions").join("2021-12-08"), false)
        .unwrap();
    assert_eq!(summary.accepted().len(), 4);
    match &summary.files["20211208_steady.csv"] {
        FileOutcome::Rejected { alias, codes, .. } => {
            assert_eq!(alias, "steady");
            assert_eq!(codes, &vec!["non_monotone".to_string()]);
        }
        other => panic!("unexpected outcome {other:?}"),
    }

    // The same bytes again are recognized and not stored twice.
    let again = hub
        .ingest_directory(round.round_date(), &common::fixture().join("submissions").join("2021-12-08"), false)
        .unwrap();
    assert!(again.files.values().all(|o| matches!(o, FileOutcome::Duplicate { .. })));
    let index = hub.store().submission_index(round.round_date()).unwrap();
    assert_eq!(index.aliases["aurora"].len(), 1);

    // Organizers may repair the broken file by sorting.
    let raw = fs::read(common::fixture().join("submissions/2021-12-08/20211208_steady.csv")).unwrap();
    let outcome = hub.ingest_file(&round, "20211208_steady.csv", &raw, true).unwrap();
    assert!(matches!(outcome, FileOutcome::Accepted { .. }));
    assert_eq!(hub.submissions(&round).unwrap().len(), 5);
}

#[test]
fn stray_and_misdated_files_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::loaded_store(dir.path());
    let round = hub.open_round(date("2021-11-10")).unwrap();
    let summary = hub
        .ingest_directory(round.round_date(), &common::fixture().join("submissions").join("2021-11-10"), false)
        .unwrap();
    assert!(matches!(summary.files["README.txt"], FileOutcome::Skipped { .. }));
    let raw = fs::read(common::fixture().join("submissions/2021-11-03/20211103_aurora.csv")).unwrap();
    assert!(matches!(hub.ingest_file(&round, "20211103_aurora.csv", &raw, false).unwrap(), FileOutcome::Skipped { .. }));
}

#[test]
fn round_calendar_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::loaded_store(dir.path());
    assert!(matches!(hub.open_round(date("2021-11-04")), Err(HubError::NotWednesday(_))));
    assert!(matches!(hub.open_round(date("2021-10-20")), Err(HubError::OutOfSeason { .. })));
    hub.open_round(date("2021-11-03")).unwrap();
    assert!(matches!(hub.open_round(date("2021-11-03")), Err(HubError::DuplicateRound(_))));
    assert!(matches!(hub.score_round(date("2021-11-10")), Err(HubError::UnknownRound(_))));

    let d = date("2021-11-03");
    hub.ingest_directory(d, &common::fixture().join("submissions").join(d.to_string()), false).unwrap();
    hub.score_round(d).unwrap();
    let err = hub.ingest_directory(d, &common::fixture().join("submissions").join(d.to_string()), false);
    assert!(matches!(err, Err(HubError::RoundScored(_))));
}

#[test]
fn rescoring_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::loaded_store(dir.path());
    let d = date("2021-11-24");
    hub.open_round(d).unwrap();
    hub.ingest_directory(d, &common::fixture().join("submissions").join(d.to_string()), false).unwrap();
    hub.score_round(d).unwrap();
    let first = fs::read(hub.store().scores_path(d)).unwrap();
    let bench = fs::read(hub.store().forecast_path(d, "benchmark")).unwrap();
    hub.score_round(d).unwrap();
    assert_eq!(fs::read(hub.store().scores_path(d)).unwrap(), first);
    assert_eq!(fs::read(hub.store().forecast_path(d, "benchmark")).unwrap(), bench);
}

#[test]
fn a_round_without_outcomes_cannot_be_scored() {
    let dir = tempfile::tempdir().unwrap();
    let config = fs::read_to_string(common::fixture().join("config")).unwrap();
    qhub::store::Store::init(dir.path(), &qhub::HubConfig::parse(&config).unwrap()).unwrap();
    let hub = qhub::Hub::open(dir.path()).unwrap();
    hub.open_round(date("2021-11-03")).unwrap();
    assert!(matches!(hub.score_round(date("2021-11-03")), Err(HubError::NoObservations(_))));
}

#[test]
fn writers_exclude_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let hub = common::loaded_store(dir.path());
    let lock = hub.lock().unwrap();
    assert!(matches!(hub.lock(), Err(HubError::Store(StoreError::Locked(_)))));

    let out = std::process::Command::new(env!("CARGO_BIN_EXE_hub"))
        .arg("--store")
        .arg(dir.path())
        .args(["open-round", "2021-11-03"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("another writer"));
    drop(lock);
    assert!(hub.lock().is_ok());
}

#[test]
fn validate_command_reports_codes() {
    let bin = env!("CARGO_BIN_EXE_hub");
    let good = common::fixture().join("submissions/2021-11-03/20211103_brook.csv");
    let out = std::process::Command::new(bin).arg("validate").arg(&good).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = common::fixture().join("submissions/2021-12-08/20211208_steady.csv");
    let out = std::process::Command::new(bin).arg("validate").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("non_monotone"));
}
