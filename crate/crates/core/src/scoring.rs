//! Evaluation measures: linear quantile score, its five-level average as a
//! CRPS approximation, absolute error of the median, central interval
//! coverage and length, per-cell averages and skill relative to a benchmark.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{Horizon, QuantileForecast, TargetKind, LEVELS, MEDIAN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("no score records")]
    Empty,
    #[error("records mix cells: {0}")]
    MixedCells(String),
    #[error("benchmark mean score {0} must be positive")]
    NonPositiveBenchmark(f64),
    #[error("benchmark has no score for {target} {horizon} on {round}")]
    RoundMismatch { target: TargetKind, horizon: Horizon, round: NaiveDate },
    #[error("observation {0} is not finite")]
    NonFiniteObservation(f64),
    #[error("score file line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// `QS_alpha(q, y) = 2 (1{y < q} - alpha)(q - y)`
pub fn quantile_score(alpha: f64, q: f64, y: f64) -> f64 {
    let indicator = if y < q { 1.0 } else { 0.0 };
    2.0 * (indicator - alpha) * (q - y)
}

fn quantile_scores(quantiles: &[f64; 5], y: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    for ((s, &q), alpha) in out.iter_mut().zip(quantiles).zip(LEVELS) {
        *s = quantile_score(alpha, q, y);
    }
    out
}

/// Mean quantile score over the five levels.
pub fn crps_approx(fc: &QuantileForecast, y: f64) -> f64 {
    quantile_scores(fc.quantiles(), y).iter().sum::<f64>() / LEVELS.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalMetrics {
    pub covered_50: bool,
    pub covered_95: bool,
    pub len_50: f64,
    pub len_95: f64,
    pub abs_error: f64,
}

/// Coverage of the closed central 50% and 95% intervals, their lengths and
/// the absolute error of the median.
pub fn interval_metrics(fc: &QuantileForecast, y: f64) -> IntervalMetrics {
    let q = fc.quantiles();
    IntervalMetrics {
        covered_50: q[1] <= y && y <= q[3],
        covered_95: q[0] <= y && y <= q[4],
        len_50: q[3] - q[1],
        len_95: q[4] - q[0],
        abs_error: (q[MEDIAN] - y).abs(),
    }
}

/// Scores of one forecaster for one (target, horizon, round).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub participant: String,
    pub target: TargetKind,
    pub horizon: Horizon,
    pub round_date: NaiveDate,
    pub quantile_scores: [f64; 5],
    pub mean_quantile_score: f64,
    pub abs_error: f64,
    pub covered_50: bool,
    pub covered_95: bool,
    pub len_50: f64,
    pub len_95: f64,
    pub imputed: bool,
}

impl ScoreRecord {
    pub fn cell(&self) -> (TargetKind, Horizon) {
        (self.target, self.horizon)
    }
}

/// Scores a forecast against its realized value. Wind quantiles are floored
/// at zero first.
pub fn score_forecast(participant: &str, fc: &QuantileForecast, y: f64) -> Result<ScoreRecord, ScoringError> {
    if !y.is_finite() {
        return Err(ScoringError::NonFiniteObservation(y));
    }
    let fc = fc.for_scoring();
    let quantile_scores = quantile_scores(fc.quantiles(), y);
    let m = interval_metrics(&fc, y);
    debug_assert!(m.len_95 >= m.len_50 && m.len_50 >= 0.0);
    Ok(ScoreRecord {
        participant: participant.to_string(),
        target: fc.target(),
        horizon: fc.horizon(),
        round_date: fc.round_date(),
        quantile_scores,
        mean_quantile_score: quantile_scores.iter().sum::<f64>() / LEVELS.len() as f64,
        abs_error: m.abs_error,
        covered_50: m.covered_50,
        covered_95: m.covered_95,
        len_50: m.len_50,
        len_95: m.len_95,
        imputed: false,
    })
}

fn check_single_cell<'a>(records: impl IntoIterator<Item = &'a ScoreRecord>) -> Result<Vec<&'a ScoreRecord>, ScoringError> {
    let real: Vec<&ScoreRecord> = records.into_iter().filter(|r| !r.imputed).collect();
    let first = real.first().ok_or(ScoringError::Empty)?;
    if let Some(other) = real
        .iter()
        .find(|r| (&r.participant, r.target, r.horizon) != (&first.participant, first.target, first.horizon))
    {
        return Err(ScoringError::MixedCells(format!(
            "{} {} {} and {} {} {}",
            first.participant, first.target, first.horizon, other.participant, other.target, other.horizon
        )));
    }
    Ok(real)
}

/// Percentage of outcomes inside the central 50% and 95% intervals.
pub fn coverage_rate(records: &[ScoreRecord]) -> Result<(f64, f64), ScoringError> {
    let real = check_single_cell(records)?;
    let n = real.len() as f64;
    let c50 = real.iter().filter(|r| r.covered_50).count() as f64;
    let c95 = real.iter().filter(|r| r.covered_95).count() as f64;
    Ok((100.0 * c50 / n, 100.0 * c95 / n))
}

/// Mean central interval lengths (50%, 95%).
pub fn mean_interval_lengths(records: &[ScoreRecord]) -> Result<(f64, f64), ScoringError> {
    let real = check_single_cell(records)?;
    let n = real.len() as f64;
    Ok((
        real.iter().map(|r| r.len_50).sum::<f64>() / n,
        real.iter().map(|r| r.len_95).sum::<f64>() / n,
    ))
}

/// `1 - mean / bench_mean`; positive values beat the benchmark.
pub fn skill_score(mean_score: f64, bench_mean_score: f64) -> Result<f64, ScoringError> {
    if !(bench_mean_score > 0.0) || !bench_mean_score.is_finite() {
        return Err(ScoringError::NonPositiveBenchmark(bench_mean_score));
    }
    Ok(1.0 - mean_score / bench_mean_score)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateScore {
    pub participant: String,
    pub target: TargetKind,
    pub horizon: Horizon,
    pub n_rounds: usize,
    pub mean_score: f64,
    pub skill: f64,
}

/// Per (participant, target, horizon) mean score over the rounds the
/// participant was scored in, and skill against the benchmark's mean over
/// exactly those rounds.
pub fn aggregate(records: &[ScoreRecord], benchmark: &[ScoreRecord]) -> Result<Vec<AggregateScore>, ScoringError> {
    let bench: BTreeMap<(TargetKind, Horizon, NaiveDate), f64> = benchmark
        .iter()
        .filter(|r| !r.imputed)
        .map(|r| ((r.target, r.horizon, r.round_date), r.mean_quantile_score))
        .collect();

    let mut groups: BTreeMap<(&str, TargetKind, Horizon), Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.imputed) {
        groups.entry((r.participant.as_str(), r.target, r.horizon)).or_default().push(r);
    }

    groups
        .into_iter()
        .map(|((participant, target, horizon), rs)| {
            let n = rs.len();
            let mut own = 0.0;
            let mut reference = 0.0;
            for r in &rs {
                own += r.mean_quantile_score;
                reference += bench
                    .get(&(target, horizon, r.round_date))
                    .ok_or(ScoringError::RoundMismatch { target, horizon, round: r.round_date })?;
            }
            let mean_score = own / n as f64;
            Ok(AggregateScore {
                participant: participant.to_string(),
                target,
                horizon,
                n_rounds: n,
                mean_score,
                skill: skill_score(mean_score, reference / n as f64)?,
            })
        })
        .collect()
}

/// Rounds `value` to `decimals` places for display.
pub fn round_display(value: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (value * f).round() / f
}

/// Formats a score with four significant digits.
pub fn format_score(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

pub const RECORD_HEADER: &str = "participant,target,horizon,round_date,qs_0.025,qs_0.25,qs_0.5,qs_0.75,qs_0.975,mean_quantile_score,abs_error,covered_50,covered_95,len_50,len_95,imputed";

pub fn records_to_csv(records: &[ScoreRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER.split(',')).expect("in-memory write");
    for r in records {
        let mut row = vec![r.participant.clone(), r.target.to_string(), r.horizon.to_string(), r.round_date.to_string()];
        row.extend(r.quantile_scores.iter().map(|s| s.to_string()));
        row.extend([
            r.mean_quantile_score.to_string(),
            r.abs_error.to_string(),
            r.covered_50.to_string(),
            r.covered_95.to_string(),
            r.len_50.to_string(),
            r.len_95.to_string(),
            r.imputed.to_string(),
        ]);
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
}

pub fn records_from_csv(text: &str) -> Result<Vec<ScoreRecord>, ScoringError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ScoringError::Csv { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>().join(",") != RECORD_HEADER {
        return Err(ScoringError::Csv { line: 1, message: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| ScoringError::Csv { line: 0, message: e.to_string() })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |m: String| ScoringError::Csv { line, message: m };
        if rec.len() != 16 {
            return Err(err(format!("expected 16 fields, found {}", rec.len())));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| err(format!("field {i}: {:?}", &rec[i])));
        let flag = |i: usize| rec[i].parse::<bool>().map_err(|_| err(format!("field {i}: {:?}", &rec[i])));
        let mut qs = [0.0; 5];
        for (k, q) in qs.iter_mut().enumerate() {
            *q = num(4 + k)?;
        }
        out.push(ScoreRecord {
            participant: rec[0].to_string(),
            target: rec[1].parse().map_err(|e| err(format!("{e}")))?,
            horizon: rec[2].parse().map_err(|e| err(format!("{e}")))?,
            round_date: rec[3].parse().map_err(|e| err(format!("{e}")))?,
            quantile_scores: qs,
            mean_quantile_score: num(9)?,
            abs_error: num(10)?,
            covered_50: flag(11)?,
            covered_95: flag(12)?,
            len_50: num(13)?,
            len_95: num(14)?,
            imputed: flag(15)?,
        });
    }
    Ok(out)
}

pub const AGGREGATE_HEADER: &str = "participant,target,horizon,n_rounds,mean_score,skill";

pub fn aggregates_to_csv(aggs: &[AggregateScore]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER.split(',')).expect("in-memory write");
    for a in aggs {
        w.write_record([
            a.participant.clone(),
            a.target.to_string(),
            a.horizon.to_string(),
            a.n_rounds.to_string(),
            a.mean_score.to_string(),
            a.skill.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fc(q: [f64; 5]) -> QuantileForecast {
        QuantileForecast::new(TargetKind::Dax, Horizon::days(1), "2021-11-03".parse().unwrap(), q).unwrap()
    }

    fn record(participant: &str, round: &str, score: f64) -> ScoreRecord {
        let mut r = score_forecast(participant, &fc([0.0; 5]), 0.0).unwrap();
        r.round_date = round.parse().unwrap();
        r.mean_quantile_score = score;
        r
    }

    #[test]
    fn quantile_score_examples() {
        assert_eq!(quantile_score(0.5, 2.0, 2.0), 0.0);
        assert_eq!(quantile_score(0.25, 1.0, 0.0), 1.5);
        assert!((quantile_score(0.975, 0.0, 1.0) - 1.95).abs() < 1e-15);
    }

    #[test]
    fn crps_approx_examples() {
        assert_eq!(crps_approx(&fc([3.0; 5]), 3.0), 0.0);
        assert!((crps_approx(&fc([1.0; 5]), 4.0) - 3.0).abs() < 1e-14);
        let f = fc([-1.8, -0.3, 0.1, 0.6, 1.7]);
        let brute: f64 = LEVELS.iter().zip(f.quantiles()).map(|(&a, &q)| quantile_score(a, q, 0.5)).sum::<f64>() / 5.0;
        assert_eq!(crps_approx(&f, 0.5), brute);
    }

    #[test]
    fn interval_examples() {
        let f = fc([-1.8, -0.3, 0.1, 0.6, 1.7]);
        let m = interval_metrics(&f, 0.5);
        assert!(m.covered_50 && m.covered_95);
        assert!((m.len_50 - 0.9).abs() < 1e-12);
        assert!((m.len_95 - 3.5).abs() < 1e-12);
        assert!((m.abs_error - 0.4).abs() < 1e-12);
        assert!(interval_metrics(&f, 0.6).covered_50);
        let far = interval_metrics(&f, 10.0);
        assert!(!far.covered_50 && !far.covered_95);
    }

    #[test]
    fn wind_scored_after_flooring() {
        let f = QuantileForecast::new(TargetKind::Wind, Horizon::hours(36), "2021-11-03".parse().unwrap(), [-4.0, -1.0, 2.0, 3.0, 5.0])
            .unwrap();
        let r = score_forecast("x", &f, 0.0).unwrap();
        assert_eq!(r.len_95, 5.0);
        assert_eq!(r.quantile_scores[0], 0.0);
        assert!(score_forecast("x", &f, f64::NAN).is_err());
    }

    #[test]
    fn coverage_examples() {
        let mut recs = Vec::new();
        for i in 0..14 {
            let mut r = record("benchmark", "2021-11-03", 1.0);
            r.covered_50 = i < 10;
            r.covered_95 = true;
            recs.push(r);
        }
        let (c50, c95) = coverage_rate(&recs).unwrap();
        assert_eq!(round_display(c50, 1), 71.4);
        assert_eq!(c95, 100.0);
        assert_eq!(coverage_rate(&[]), Err(ScoringError::Empty));
        recs.push(record("other", "2021-11-03", 1.0));
        assert!(matches!(coverage_rate(&recs), Err(ScoringError::MixedCells(_))));
    }

    #[test]
    fn skill_examples() {
        assert_eq!(skill_score(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(skill_score(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(skill_score(4.0, 2.0).unwrap(), -1.0);
        assert!(skill_score(1.0, 0.0).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let bench = vec![record("benchmark", "2021-11-03", 2.0)];
        let own = vec![record("Rosa", "2021-11-03", 1.0)];
        let a = aggregate(&own, &bench).unwrap();
        assert_eq!(a[0].mean_score, 1.0);
        assert_eq!(a[0].skill, 0.5);
        assert_eq!(aggregate(&bench, &bench).unwrap()[0].skill, 0.0);
        let late = vec![record("Rosa", "2021-11-10", 1.0)];
        assert!(matches!(aggregate(&late, &bench), Err(ScoringError::RoundMismatch { .. })));
    }

    #[test]
    fn aggregate_uses_participant_rounds_only() {
        let bench = vec![record("benchmark", "2021-11-03", 2.0), record("benchmark", "2021-11-10", 6.0)];
        let own = vec![record("Rosa", "2021-11-10", 3.0)];
        let a = aggregate(&own, &bench).unwrap();
        assert_eq!(a[0].n_rounds, 1);
        assert_eq!(a[0].skill, 0.5);
    }

    #[test]
    fn csv_round_trip() {
        let f = fc([-1.8, -0.3, 0.1, 0.6, 1.7]);
        let recs = vec![score_forecast("Jake, the detective", &f, 0.123).unwrap(), score_forecast("b", &f, -7.0).unwrap()];
        assert_eq!(records_from_csv(&records_to_csv(&recs)).unwrap(), recs);
        assert!(aggregates_to_csv(&[]).starts_with(AGGREGATE_HEADER));
    }

    #[test]
    fn display_rounding() {
        assert_eq!(round_display(100.0 * 7.0 / 13.0, 1), 53.8);
        assert_eq!(format_score(0.123456), "0.1235");
        assert_eq!(format_score(12.3456), "12.35");
        assert_eq!(format_score(12345.6), "12346");
    }

    proptest! {
        #[test]
        fn quantile_score_nonnegative_and_minimized_at_y(alpha in 0.01f64..0.99, q in -100f64..100.0, y in -100f64..100.0) {
            let s = quantile_score(alpha, q, y);
            prop_assert!(s >= 0.0);
            prop_assert!(s >= quantile_score(alpha, y, y));
            prop_assert_eq!(s == 0.0, q == y);
        }

        #[test]
        fn degenerate_forecast_is_absolute_error(c in -1e3f64..1e3, y in -1e3f64..1e3) {
            let v = crps_approx(&fc([c; 5]), y);
            prop_assert!((v - (c - y).abs()).abs() <= 1e-12 * (1.0 + (c - y).abs()));
        }

        #[test]
        fn skill_scale_invariant(s in 0.01f64..100.0, b in 0.01f64..100.0, k in 0.01f64..100.0) {
            let a = skill_score(s, b).unwrap();
            let scaled = skill_score(k * s, k * b).unwrap();
            prop_assert!((a - scaled).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}
