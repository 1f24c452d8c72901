//! Serialization round trips and format invariants through the public API.

use chrono::{Duration, NaiveDate, TimeZone, Timelike, Utc};
use proptest::prelude::*;
use qhub_core::ingest::{
    parse_nwp, parse_observations, parse_prices, write_nwp, write_observations, write_prices, EnsembleNwpForecast,
    NwpVariable, PriceSeries, ENSEMBLE_SIZE,
};
use qhub_core::scoring::{records_from_csv, records_to_csv, score_forecast};
use qhub_core::submission::{
    parse_submission, parse_submission_filename, serialize_submission, submission_filename, ParseOptions,
};
use qhub_core::{resolve_valid_time, Horizon, QuantileForecast, RoundSpec, TargetKind};

fn wednesday(week: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 11, 3).unwrap() + Duration::weeks(week.into())
}

/// Monotone quantiles from a start value and non-negative gaps.
fn quantiles(start: f64, gaps: [f64; 4]) -> [f64; 5] {
    let mut q = [start; 5];
    for i in 0..4 {
        q[i + 1] = q[i] + gaps[i];
    }
    // Two decimals, as participants write them.
    q.map(|v| (v * 100.0).round() / 100.0)
}

fn submission_text(round: &RoundSpec, rows: &[[f64; 5]]) -> String {
    let mut out = String::from("forecast_date,target,horizon,q0.025,q0.25,q0.5,q0.75,q0.975\n");
    for ((target, horizon), q) in round.cells().zip(rows) {
        let values: Vec<String> = q.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{},{},{}\n", round.round_date(), target, horizon, values.join(",")));
    }
    out
}

fn row_strategy() -> impl Strategy<Value = [f64; 5]> {
    (0.0f64..30.0, prop::array::uniform4(0.0f64..5.0)).prop_map(|(s, g)| quantiles(s, g))
}

proptest! {
    #[test]
    fn submissions_survive_serialization(week in 0u32..16, rows in prop::collection::vec(row_strategy(), 15)) {
        let round = RoundSpec::full(wednesday(week)).unwrap();
        let text = submission_text(&round, &rows);
        let parsed = parse_submission(text.as_bytes(), &round, "ferret", &ParseOptions::default()).unwrap();
        prop_assert_eq!(parsed.submission.rows().len(), round.expected_row_count());
        let again = serialize_submission(&parsed.submission);
        let back = parse_submission(again.as_bytes(), &round, "ferret", &ParseOptions::default()).unwrap();
        prop_assert_eq!(back.submission, parsed.submission);
    }

    #[test]
    fn row_order_does_not_matter(rows in prop::collection::vec(row_strategy(), 15), seed in any::<u64>()) {
        let round = RoundSpec::full(wednesday(2)).unwrap();
        let text = submission_text(&round, &rows);
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        // Deterministic rotation stands in for a shuffle.
        let k = (seed % lines.len() as u64) as usize;
        lines.rotate_left(k);
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let a = parse_submission(text.as_bytes(), &round, "ferret", &ParseOptions::default()).unwrap();
        let b = parse_submission(shuffled.as_bytes(), &round, "ferret", &ParseOptions::default()).unwrap();
        prop_assert_eq!(a.submission, b.submission);
    }

    #[test]
    fn filenames_round_trip(week in 0u32..16, alias in "[a-z][a-z0-9_]{0,15}") {
        prop_assume!(qhub_core::submission::validate_alias(&alias).is_ok());
        prop_assume!(!qhub_core::submission::is_reserved_alias(&alias));
        let name = submission_filename(wednesday(week), &alias);
        prop_assert_eq!(parse_submission_filename(&name), Some((wednesday(week), alias)));
    }

    #[test]
    fn prices_round_trip(start in 10_000f64..17_000.0, steps in prop::collection::vec(-200f64..200.0, 1..60)) {
        let mut day = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
        let mut price = start;
        let mut entries = Vec::new();
        for s in steps {
            entries.push((day, (price * 100.0).round() / 100.0));
            price = (price + s).max(1.0);
            day += Duration::days(1);
        }
        let series = PriceSeries::from_entries(entries).unwrap();
        let back = parse_prices(&write_prices(&series)).unwrap();
        prop_assert_eq!(back.entries(), series.entries());
    }

    #[test]
    fn observations_round_trip(values in prop::collection::vec(0f64..60.0, 1..80)) {
        let start = Utc.with_ymd_and_hms(2021, 10, 1, 0, 0, 0).unwrap();
        let mut text = String::from("timestamp_utc,value\n");
        for (i, v) in values.iter().enumerate() {
            let t = start + Duration::hours(12 * i as i64);
            text.push_str(&format!("{},{v}\n", t.format("%Y-%m-%dT%H:%M:%SZ")));
        }
        let series = parse_observations(&text, TargetKind::Wind).unwrap();
        prop_assert_eq!(series.len(), values.len());
        let back = parse_observations(&write_observations(&series), TargetKind::Wind).unwrap();
        prop_assert_eq!(back.iter().collect::<Vec<_>>(), series.iter().collect::<Vec<_>>());
    }

    #[test]
    fn nwp_round_trip(lead in prop::sample::select(vec![36u32, 48, 60, 72, 84]), base in -10f64..25.0,
                      noise in prop::collection::vec(-3f64..3.0, ENSEMBLE_SIZE)) {
        let init = Utc.with_ymd_and_hms(2021, 11, 3, 0, 0, 0).unwrap();
        let members: Vec<f64> = noise.iter().map(|n| ((base + n) * 100.0).round() / 100.0).collect();
        let fc = EnsembleNwpForecast { variable: NwpVariable::Temperature2m, init_time: init, lead_hours: lead, members };
        let back = parse_nwp(&write_nwp(std::slice::from_ref(&fc))).unwrap();
        prop_assert_eq!(back, vec![fc]);
    }

    #[test]
    fn score_tables_round_trip(rows in prop::collection::vec((row_strategy(), 0f64..40.0), 1..20)) {
        let round = RoundSpec::full(wednesday(1)).unwrap();
        let cells: Vec<_> = round.cells().collect();
        let records: Vec<_> = rows
            .iter()
            .zip(cells.iter().cycle())
            .map(|((q, y), &(target, horizon))| {
                let fc = QuantileForecast::new(target, horizon, round.round_date(), *q).unwrap();
                score_forecast("ferret", &fc, *y).unwrap()
            })
            .collect();
        prop_assert_eq!(records_from_csv(&records_to_csv(&records)).unwrap(), records);
    }
}

#[test]
fn valid_times_follow_the_round_calendar() {
    let round = RoundSpec::full(wednesday(0)).unwrap();
    for (target, horizon) in round.cells() {
        let t = resolve_valid_time(&round, target, horizon).unwrap();
        match target {
            TargetKind::Dax => {
                assert_eq!((t.hour(), t.minute()), (16, 30));
                let days = (t.date_naive() - round.round_date()).num_days();
                assert_eq!(Horizon::days(days as u32), horizon);
            }
            _ => {
                let hours = (t - round.round_date().and_hms_opt(0, 0, 0).unwrap().and_utc()).num_hours();
                assert_eq!(Horizon::hours(hours as u32), horizon);
                assert!(t.hour() == 0 || t.hour() == 12);
            }
        }
    }
    assert!(resolve_valid_time(&round, TargetKind::Dax, Horizon::hours(36)).is_err());
}

#[test]
fn dax_horizons_map_to_consecutive_trading_steps() {
    let steps: Vec<Option<u32>> = TargetKind::Dax.horizons().iter().map(|h| h.trading_steps()).collect();
    assert_eq!(steps, vec![Some(1), Some(2), Some(3), Some(4), Some(5)]);
}
