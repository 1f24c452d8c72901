#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::NaiveDate;
use qhub::{Hub, HubConfig};
use qhub::store::Store;
use qhub_core::TargetKind;

pub fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join("season")
}

pub fn fixture_rounds() -> Vec<NaiveDate> {
    let mut rounds: Vec<NaiveDate> = fs::read_dir(fixture().join("submissions"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().parse().unwrap())
        .collect();
    rounds.sort();
    rounds
}

/// A fresh store with the fixture's config and data loaded but no rounds.
pub fn loaded_store(root: &Path) -> Hub {
    let config = HubConfig::parse(&fs::read_to_string(fixture().join("config")).unwrap()).unwrap();
    Store::init(root, &config).unwrap();
    let hub = Hub::open(root).unwrap();
    let f = fixture();
    hub.load_prices(&f.join("prices.csv")).unwrap();
    for target in [TargetKind::Temperature, TargetKind::Wind] {
        hub.load_observations(target, &f.join("observations").join(format!("{}.csv", target.label()))).unwrap();
    }
    hub.load_nwp(&f.join("nwp")).unwrap();
    hub
}

/// Opens, ingests and scores every fixture round through the library.
pub fn run_season(root: &Path) -> Hub {
    let hub = loaded_store(root);
    for date in fixture_rounds() {
        hub.open_round(date).unwrap();
        hub.ingest_directory(date, &fixture().join("submissions").join(date.to_string()), false).unwrap();
        hub.score_round(date).unwrap();
    }
    hub.publish().unwrap();
    hub
}

/// The same season driven through the `hub` binary.
pub fn run_season_cli(root: &Path) {
    let f = fixture();
    let hub = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_hub"))
            .arg("--store")
            .arg(root)
            .args(args)
            .output()
            .expect("hub binary runs");
        assert!(out.status.success(), "hub {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    };
    let p = |p: PathBuf| p.to_string_lossy().into_owned();
    hub(&["init", "--config", &p(f.join("config"))]);
    hub(&["load-prices", &p(f.join("prices.csv"))]);
    hub(&["load-observations", "temperature", &p(f.join("observations").join("temperature.csv"))]);
    hub(&["load-observations", "wind", &p(f.join("observations").join("wind.csv"))]);
    hub(&["load-nwp", &p(f.join("nwp"))]);
    for date in fixture_rounds() {
        let d = date.to_string();
        hub(&["open-round", &d]);
        hub(&["ingest", &d, &p(f.join("submissions").join(&d))]);
        hub(&["score", &d]);
    }
    hub(&["leaderboard"]);
}
