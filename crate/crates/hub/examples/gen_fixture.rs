//! Writes the synthetic challenge season used by the integration tests.
//!
//! ```text
//! cargo run -p qhub --example gen_fixture -- crates/hub/tests/fixtures/season
//! ```
//!
//! The season has 14 index rounds (2021-10-27 to 2022-02-09 with a holiday
//! break) and 13 weather rounds. Observations are planted so that the
//! benchmark and the mean ensemble cover each cell a prescribed number of
//! times; the counts live in `COVERAGE_COUNTS` and are what the acceptance
//! suite checks against.
//!
//! Output is a pure function of `SEED`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Utc, Weekday};
use qhub_core::benchmarks::{dax_benchmark, raw_ensemble_benchmark, RollingWindowConfig};
use qhub_core::ingest::{write_nwp, EnsembleNwpForecast, NwpVariable, PriceSeries, ENSEMBLE_SIZE};
use qhub_core::submission::{serialize_submission, submission_filename, SubmissionFile};
use qhub_core::{QuantileForecast, RoundSpec, TargetKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 20211027;
const DAX_WINDOW: usize = 250;

/// (target, horizon, benchmark in 50%, ensemble in 50%, benchmark in 95%,
/// ensemble in 95%) as counts of evaluated rounds.
const COVERAGE_COUNTS: [(TargetKind, u32, usize, usize, usize, usize); 15] = [
    (TargetKind::Dax, 1, 10, 10, 14, 14),
    (TargetKind::Dax, 2, 7, 6, 13, 13),
    (TargetKind::Dax, 5, 7, 7, 13, 12),
    (TargetKind::Dax, 6, 5, 5, 14, 12),
    (TargetKind::Dax, 7, 7, 6, 13, 13),
    (TargetKind::Temperature, 36, 2, 4, 8, 12),
    (TargetKind::Temperature, 48, 6, 10, 12, 13),
    (TargetKind::Temperature, 60, 7, 10, 13, 13),
    (TargetKind::Temperature, 72, 4, 7, 10, 12),
    (TargetKind::Temperature, 84, 9, 8, 12, 12),
    (TargetKind::Wind, 36, 1, 8, 7, 13),
    (TargetKind::Wind, 48, 3, 6, 6, 12),
    (TargetKind::Wind, 60, 4, 8, 8, 11),
    (TargetKind::Wind, 72, 4, 5, 7, 12),
    (TargetKind::Wind, 84, 7, 4, 8, 12),
];

/// Members of the synthetic crowd: spread multiplier and location shift (in
/// units of the cell scale). Both average to the identity, so the mean of
/// the four is the planted ensemble forecast.
const CROWD: [(&str, f64, f64); 4] = [
    ("aurora", 0.6, -0.3),
    ("brook", 0.8, 0.1),
    ("cedar", 1.2, 0.3),
    ("delta", 1.4, -0.1),
];
/// Submits the planted forecast itself, skips two rounds and has one file
/// rejected.
const STEADY: &str = "steady";

#[derive(Debug, Clone, Copy, PartialEq)]
enum Region {
    Inner,
    Outer,
    Outside,
}

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn midnight(d: NaiveDate) -> DateTime<Utc> {
    d.and_time(NaiveTime::MIN).and_utc()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn region_of(q: &[f64; 5], y: f64) -> Region {
    if q[1] <= y && y <= q[3] {
        Region::Inner
    } else if q[0] <= y && y <= q[4] {
        Region::Outer
    } else {
        Region::Outside
    }
}

fn patterns(rng: &mut ChaCha8Rng, n: usize, in50: usize, in95: usize) -> Vec<Region> {
    let mut v = vec![Region::Inner; in50];
    v.resize(in95, Region::Outer);
    v.resize(n, Region::Outside);
    v.shuffle(rng);
    v
}

/// A value placed in `region` of the quantiles `q`. Nonnegative targets only
/// leave the distribution on the upper side.
fn place(rng: &mut ChaCha8Rng, q: &[f64; 5], region: Region, upper_only: bool) -> f64 {
    let u = rng.random_range(0.25..0.75);
    let upper = upper_only || rng.random_bool(0.5);
    match region {
        Region::Inner => q[1] + u * (q[3] - q[1]),
        Region::Outer if upper => q[3] + u * (q[4] - q[3]),
        Region::Outer => q[0] + u * (q[1] - q[0]),
        Region::Outside => {
            let gap = (0.3 + u) * (q[3] - q[1]).max(1e-3);
            if upper {
                q[4] + gap
            } else {
                q[0] - gap
            }
        }
    }
}

/// Quantiles of scale `s` positioned so that `y` falls in `region`.
/// `above_only` keeps misses on the upper side (forecast above `y`).
fn planted_forecast(rng: &mut ChaCha8Rng, y: f64, s: f64, region: Region, above_only: bool) -> [f64; 5] {
    let offsets = [-3.0, -1.0, 0.0, 1.0, 3.0];
    let flip = if above_only || rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let center = match region {
        Region::Inner => y + rng.random_range(-0.5..0.5) * s,
        Region::Outer => y + flip * 2.0 * s,
        Region::Outside => y + flip * 4.0 * s,
    };
    offsets.map(|o| center + o * s)
}

fn crowd_member(planted: &[f64; 5], spread: f64, shift: f64, s: f64) -> [f64; 5] {
    let c = planted[2];
    planted.map(|q| round4(c + shift * s + spread * (q - c)))
}

struct Season {
    rounds: Vec<RoundSpec>,
    weather_rounds: Vec<NaiveDate>,
    /// Round of the index 7-day close dropped as a market holiday.
    holiday_close: NaiveDate,
}

fn season() -> Season {
    let dax_dates = [
        "2021-10-27", "2021-11-03", "2021-11-10", "2021-11-17", "2021-11-24", "2021-12-01", "2021-12-08",
        "2021-12-15", "2021-12-22", "2022-01-12", "2022-01-19", "2022-01-26", "2022-02-02", "2022-02-09",
    ];
    let weather_start = date("2021-11-03");
    let rounds = dax_dates
        .iter()
        .map(|d| {
            let d = date(d);
            let targets: &[TargetKind] =
                if d < weather_start { &[TargetKind::Dax] } else { &TargetKind::ALL };
            RoundSpec::new(d, targets).unwrap()
        })
        .collect::<Vec<_>>();
    let weather_rounds = rounds.iter().map(|r| r.round_date()).filter(|d| *d >= weather_start).collect();
    Season { rounds, weather_rounds, holiday_close: date("2021-12-29") }
}

fn is_business_day(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Prices plus, per round, the planted index forecast of each horizon.
fn build_prices(rng: &mut ChaCha8Rng, season: &Season) -> (PriceSeries, BTreeMap<(NaiveDate, u32), ([f64; 5], f64)>) {
    let walk = Normal::new(0.03_f64, 1.1).unwrap();
    let mut closes: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    let mut level: f64 = 13_000.0;
    let extend_walk = |closes: &mut BTreeMap<NaiveDate, f64>, level: &mut f64, from: NaiveDate, to: NaiveDate, rng: &mut ChaCha8Rng| {
        let mut d = from;
        while d <= to {
            if is_business_day(d) && d != season.holiday_close {
                *level = round2(*level * (walk.sample(rng) / 100.0).exp());
                closes.insert(d, *level);
            }
            d += Duration::days(1);
        }
    };
    let first = season.rounds[0].round_date();
    extend_walk(&mut closes, &mut level, date("2020-09-01"), first, rng);

    let counts: BTreeMap<u32, (usize, usize, usize, usize)> = COVERAGE_COUNTS
        .iter()
        .filter(|c| c.0 == TargetKind::Dax)
        .map(|c| (c.1, (c.2, c.3, c.4, c.5)))
        .collect();
    let horizons = TargetKind::Dax.horizons();
    // Rounds whose close on this horizon exists.
    let evaluated = |h: u32| {
        season
            .rounds
            .iter()
            .filter(|r| r.round_date() + Duration::days(h.into()) != season.holiday_close)
            .count()
    };
    let mut bench_patterns = BTreeMap::new();
    let mut ens_patterns = BTreeMap::new();
    for h in horizons {
        let (b50, e50, b95, e95) = counts[&h.magnitude];
        let n = evaluated(h.magnitude);
        bench_patterns.insert(h.magnitude, patterns(rng, n, b50, b95));
        ens_patterns.insert(h.magnitude, patterns(rng, n, e50, e95));
    }
    let mut used: BTreeMap<u32, usize> = BTreeMap::new();

    let mut planted = BTreeMap::new();
    for (i, round) in season.rounds.iter().enumerate() {
        let series = PriceSeries::from_entries(closes.iter().map(|(d, p)| (*d, *p)).collect()).unwrap();
        let bench = dax_benchmark(&series, round, &RollingWindowConfig { window_length: DAX_WINDOW }).unwrap();
        let anchor = series.entries()[series.last_on_or_before(round.round_date()).unwrap()].1;
        for (h, b) in horizons.iter().zip(&bench) {
            let valid = round.round_date() + Duration::days(h.magnitude.into());
            if valid == season.holiday_close {
                continue;
            }
            let k = used.entry(h.magnitude).or_default();
            let (br, er) = (bench_patterns[&h.magnitude][*k], ens_patterns[&h.magnitude][*k]);
            *k += 1;
            let q = b.quantiles();
            let target = place(rng, q, br, false);
            let price = round2(anchor * (target / 100.0).exp());
            let y = 100.0 * (price.ln() - f64::ln(anchor));
            assert_eq!(region_of(q, y), br, "index close rounding moved {valid} out of its region");
            closes.insert(valid, price);

            let s = 0.4 * f64::from(h.trading_steps().unwrap()).sqrt();
            let e = planted_forecast(rng, y, s, er, false);
            assert_eq!(region_of(&e, y), er);
            planted.insert((round.round_date(), h.magnitude), (e, s));
        }
        // Fill the gap to the next round's first horizon.
        let last_set = round.round_date() + Duration::days(7);
        let next_start = season.rounds.get(i + 1).map(|r| r.round_date()).unwrap_or(last_set);
        if next_start > last_set {
            let mut lvl = closes.range(..=last_set).next_back().map(|(_, p)| *p).unwrap();
            extend_walk(&mut closes, &mut lvl, last_set + Duration::days(1), next_start, rng);
        }
    }
    let series = PriceSeries::from_entries(closes.into_iter().collect()).unwrap();
    (series, planted)
}

struct Weather {
    nwp: BTreeMap<DateTime<Utc>, Vec<EnsembleNwpForecast>>,
    observations: BTreeMap<TargetKind, BTreeMap<DateTime<Utc>, f64>>,
    planted: BTreeMap<(NaiveDate, TargetKind, u32), ([f64; 5], f64)>,
}

fn truth(target: TargetKind, t: DateTime<Utc>, rng: &mut ChaCha8Rng) -> f64 {
    let days = (t - midnight(date("2021-09-01"))).num_hours() as f64 / 24.0;
    let diurnal = if t.format("%H").to_string() == "12" { 1.0 } else { -1.0 };
    match target {
        TargetKind::Temperature => {
            round2(14.0 - 0.11 * days + 2.5 * diurnal + Normal::new(0.0, 2.0).unwrap().sample(rng))
        }
        TargetKind::Wind => round2((20.0 + 2.0 * diurnal + Normal::new(0.0, 4.0).unwrap().sample(rng)).max(4.0)),
        TargetKind::Dax => unreachable!(),
    }
}

fn ensemble(target: TargetKind, center: f64, lead: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (bias, spread) = match target {
        TargetKind::Temperature => (0.6, 0.9 + 0.01 * f64::from(lead)),
        _ => (-1.5, 1.8 + 0.02 * f64::from(lead)),
    };
    let noise = Normal::new(0.0, spread).unwrap();
    let shift = Normal::new(0.0, 0.5 * spread).unwrap().sample(rng);
    (0..ENSEMBLE_SIZE)
        .map(|_| {
            let v = round2(center + bias + shift + noise.sample(rng));
            if target.is_nonnegative() { v.max(0.0) } else { v }
        })
        .collect()
}

fn build_weather(rng: &mut ChaCha8Rng, season: &Season) -> Weather {
    let weather = [TargetKind::Temperature, TargetKind::Wind];
    let mut observations: BTreeMap<TargetKind, BTreeMap<DateTime<Utc>, f64>> = BTreeMap::new();
    let mut t = midnight(date("2021-09-15"));
    while t <= midnight(date("2022-02-14")) {
        for target in weather {
            let v = truth(target, t, rng);
            observations.entry(target).or_default().insert(t, v);
        }
        t += Duration::hours(12);
    }

    let mut inits: Vec<DateTime<Utc>> = Vec::new();
    let mut d = date("2021-09-20");
    while d <= date("2021-10-31") {
        inits.push(midnight(d));
        d += Duration::days(1);
    }
    inits.extend(season.weather_rounds.iter().map(|&d| midnight(d)));

    let mut nwp: BTreeMap<DateTime<Utc>, Vec<EnsembleNwpForecast>> = BTreeMap::new();
    for &init in &inits {
        for target in weather {
            let variable = NwpVariable::for_target(target).unwrap();
            for h in target.horizons() {
                let valid = init + Duration::hours(h.magnitude.into());
                let center = observations[&target][&valid];
                let members = ensemble(target, center, h.magnitude, rng);
                nwp.entry(init).or_default().push(EnsembleNwpForecast {
                    variable,
                    init_time: init,
                    lead_hours: h.magnitude,
                    members,
                });
            }
        }
    }

    let mut planted = BTreeMap::new();
    let n = season.weather_rounds.len();
    for &(target, lead, b50, e50, b95, e95) in COVERAGE_COUNTS.iter().filter(|c| c.0.is_weather()) {
        let bench = patterns(rng, n, b50, b95);
        let ens = patterns(rng, n, e50, e95);
        let variable = NwpVariable::for_target(target).unwrap();
        for (k, &round) in season.weather_rounds.iter().enumerate() {
            let init = midnight(round);
            let fc = nwp[&init].iter().find(|f| f.variable == variable && f.lead_hours == lead).unwrap();
            let b = raw_ensemble_benchmark(fc, target).unwrap();
            let q = b.quantiles();
            let y = round2(place(rng, q, bench[k], target.is_nonnegative()));
            assert_eq!(region_of(q, y), bench[k], "{target} {lead}h on {round}");
            observations.get_mut(&target).unwrap().insert(fc.valid_time(), y);

            // Wind forecasts shrink with the observation so no crowd member
            // goes below zero.
            let s = if target.is_nonnegative() { (y / 8.0).min(1.5) } else { 0.8 };
            assert!(s > 0.05, "{target} {lead}h on {round}: observation {y} too close to zero");
            let e = planted_forecast(rng, y, s, ens[k], target.is_nonnegative());
            assert_eq!(region_of(&e, y), ens[k]);
            planted.insert((round, target, lead), (e, s));
        }
    }
    Weather { nwp, observations, planted }
}

fn write(path: &Path, contents: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, contents).unwrap();
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join("season")
    });
    if out.exists() {
        fs::remove_dir_all(&out).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let season = season();
    let (prices, dax_planted) = build_prices(&mut rng, &season);
    let weather = build_weather(&mut rng, &season);

    write(
        &out.join("config"),
        &format!(
            "# synthetic winter season\nstation_id = fixture\nseason_start = 2021-10-27\nseason_end = 2022-02-09\n\
             weather_start = 2021-11-03\nseed = {SEED}\ndax_window = {DAX_WINDOW}\n"
        ),
    );

    let mut csv = String::from("date,close\n");
    for (d, p) in prices.entries() {
        csv.push_str(&format!("{d},{p:.2}\n"));
    }
    write(&out.join("prices.csv"), &csv);

    for (target, series) in &weather.observations {
        let mut csv = String::from("timestamp_utc,value\n");
        for (t, v) in series {
            csv.push_str(&format!("{},{v:.2}\n", t.format("%Y-%m-%dT%H:%M:%SZ")));
        }
        write(&out.join("observations").join(format!("{}.csv", target.label())), &csv);
    }

    for (init, blocks) in &weather.nwp {
        write(&out.join("nwp").join(format!("{}.txt", init.format("%Y%m%d%H"))), &write_nwp(blocks));
    }

    // Rounds where `steady` sends nothing, and the one where its file is broken.
    let steady_skips = [date("2021-11-17"), date("2022-01-19")];
    let steady_broken = date("2021-12-08");
    for round in &season.rounds {
        let rd = round.round_date();
        let dir = out.join("submissions").join(rd.to_string());
        let mut planted_rows = Vec::new();
        let mut crowd_rows: Vec<Vec<QuantileForecast>> = vec![Vec::new(); CROWD.len()];
        for (target, h) in round.cells() {
            let planted = match target {
                TargetKind::Dax => dax_planted.get(&(rd, h.magnitude)).copied(),
                _ => weather.planted.get(&(rd, target, h.magnitude)).copied(),
            };
            // Cells without an outcome still need a forecast.
            let (e, s) = planted.unwrap_or_else(|| {
                let c = if target == TargetKind::Dax { 0.0 } else { 20.0 };
                ([-3.0, -1.0, 0.0, 1.0, 3.0].map(|o| c + o * 0.5), 0.5)
            });
            let e = e.map(round4);
            planted_rows.push(QuantileForecast::new(target, h, rd, e).unwrap());
            for (rows, &(_, spread, shift)) in crowd_rows.iter_mut().zip(&CROWD) {
                rows.push(QuantileForecast::new(target, h, rd, crowd_member(&e, spread, shift, s)).unwrap());
            }
        }
        for (rows, &(alias, ..)) in crowd_rows.into_iter().zip(&CROWD) {
            let sub = SubmissionFile::from_rows(alias, rd, rows).unwrap();
            write(&dir.join(submission_filename(rd, alias)), &serialize_submission(&sub));
        }
        if steady_skips.contains(&rd) {
            continue;
        }
        let sub = SubmissionFile::from_rows(STEADY, rd, planted_rows).unwrap();
        let mut text = serialize_submission(&sub);
        if rd == steady_broken {
            // Swap the median and upper quartile of the first row.
            let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
            let mut fields: Vec<&str> = lines[1].split(',').collect();
            fields.swap(5, 6);
            lines[1] = fields.join(",");
            text = lines.join("\n") + "\n";
        }
        write(&dir.join(submission_filename(rd, STEADY)), &text);
    }
    write(&out.join("submissions").join("2021-11-10").join("README.txt"), "stray upload\n");
    println!("wrote {}", out.display());
}

