//! Leaderboard and diagnostic analyses over all scored rounds.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use qhub_core::ranking::{impute_missing, overall_ranking, rank_cells, share_beating_benchmark, Cell, RankingError};
use qhub_core::scoring::{coverage_rate, mean_interval_lengths, skill_score, ScoreRecord};
use qhub_core::{Horizon, TargetKind};
use serde::Serialize;

use crate::pipeline::{is_participant, Hub, HubError, REFERENCE_ALIASES};
use crate::store::{atomic_write, to_json, RoundStatus};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub target: TargetKind,
    pub horizon: Horizon,
    /// Rounds with a score of this forecaster.
    pub n_rounds: usize,
    /// Mean score over those rounds.
    pub mean_score: f64,
    /// Mean over all evaluable rounds with missed rounds penalized.
    pub completed_score: Option<f64>,
    /// Skill against the benchmark over the forecaster's own rounds.
    pub skill: Option<f64>,
    pub rank: Option<f64>,
    pub coverage_50: f64,
    pub coverage_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardRow {
    pub position: Option<usize>,
    pub alias: String,
    pub reference: bool,
    pub avg_rank: Option<f64>,
    pub best_rank: Option<f64>,
    pub temp_avg_rank: Option<f64>,
    pub tiebreak: Option<String>,
    pub summed_skill: f64,
    pub missed_rounds: usize,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaderboard {
    pub seed: u64,
    pub scored_rounds: Vec<NaiveDate>,
    /// Ranked participants by position, then reference forecasters.
    pub rows: Vec<LeaderboardRow>,
}

impl Leaderboard {
    pub fn ranked(&self) -> impl Iterator<Item = &LeaderboardRow> {
        self.rows.iter().filter(|r| !r.reference)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["position", "alias", "avg_rank", "best_rank", "temp_avg_rank", "tiebreak"])
            .expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in self.ranked() {
            w.write_record([
                r.position.map(|p| p.to_string()).unwrap_or_default(),
                r.alias.clone(),
                opt(r.avg_rank),
                opt(r.best_rank),
                opt(r.temp_avg_rank),
                r.tiebreak.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub alias: String,
    pub target: TargetKind,
    pub horizon: Horizon,
    pub n: usize,
    pub coverage_50: f64,
    pub coverage_95: f64,
    pub mean_len_50: f64,
    pub mean_len_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareRow {
    pub round_date: NaiveDate,
    pub target: TargetKind,
    /// `None` when nobody submitted or the benchmark is missing.
    pub share: Option<f64>,
    pub submitters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCount {
    pub total: usize,
    pub by_target: BTreeMap<TargetKind, usize>,
    pub by_cell: Vec<CellCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCount {
    pub target: TargetKind,
    pub horizon: Horizon,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Participation {
    pub alias: String,
    pub submitted: Vec<NaiveDate>,
    pub missed: Vec<NaiveDate>,
    /// More misses than the two skips the rules allow.
    pub flagged: bool,
}

/// Skips allowed before an alias is flagged to the operator.
pub const ALLOWED_SKIPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Publication {
    pub leaderboard: Leaderboard,
    pub coverage: Vec<CoverageRow>,
    pub share_beating_benchmark: Vec<ShareRow>,
    pub sample_count: SampleCount,
    pub participation: Vec<Participation>,
}

type ByCell<'a> = BTreeMap<Cell, Vec<&'a ScoreRecord>>;

fn group<'a>(records: &'a [ScoreRecord]) -> BTreeMap<&'a str, ByCell<'a>> {
    let mut out: BTreeMap<&str, ByCell> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.imputed) {
        out.entry(r.participant.as_str()).or_default().entry(r.cell()).or_default().push(r);
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Skill over the forecaster's own rounds; `None` when the benchmark lacks
/// any of them.
fn own_round_skill(records: &[&ScoreRecord], bench: &BTreeMap<(Cell, NaiveDate), f64>) -> Option<f64> {
    let mut reference = Vec::with_capacity(records.len());
    for r in records {
        reference.push(*bench.get(&(r.cell(), r.round_date))?);
    }
    skill_score(mean(records.iter().map(|r| r.mean_quantile_score)), mean(reference.into_iter())).ok()
}

pub fn build(
    records: &[ScoreRecord],
    scored_rounds: &[NaiveDate],
    round_targets: &BTreeMap<NaiveDate, Vec<TargetKind>>,
    submitted: &BTreeMap<String, BTreeSet<NaiveDate>>,
    seed: u64,
) -> Result<Publication, RankingError> {
    let grouped = group(records);
    let bench: BTreeMap<(Cell, NaiveDate), f64> = grouped
        .get("benchmark")
        .into_iter()
        .flat_map(|cells| cells.values().flatten())
        .map(|r| ((r.cell(), r.round_date), r.mean_quantile_score))
        .collect();

    // Evaluable rounds per cell: rounds in which the cell had an observation.
    let mut evaluable: BTreeMap<Cell, BTreeSet<NaiveDate>> = BTreeMap::new();
    for r in records {
        evaluable.entry(r.cell()).or_default().insert(r.round_date);
    }

    let participants: Vec<String> = grouped.keys().filter(|a| is_participant(a)).map(|a| a.to_string()).collect();

    let mut completed: BTreeMap<Cell, BTreeMap<String, f64>> = BTreeMap::new();
    for (&cell, rounds) in &evaluable {
        let scores: BTreeMap<String, BTreeMap<NaiveDate, f64>> = participants
            .iter()
            .filter_map(|p| {
                let rs = grouped[p.as_str()].get(&cell)?;
                Some((p.clone(), rs.iter().map(|r| (r.round_date, r.mean_quantile_score)).collect()))
            })
            .collect();
        if scores.is_empty() {
            continue;
        }
        let rounds: Vec<NaiveDate> = rounds.iter().copied().collect();
        completed.insert(cell, impute_missing(cell, &rounds, &participants, &scores)?.completed);
    }

    let ranking = if participants.is_empty() || completed.is_empty() {
        Vec::new()
    } else {
        let matrix = rank_cells(&participants, &completed)?;
        let board = overall_ranking(&matrix, seed);
        board
            .into_iter()
            .map(|e| {
                let cells = matrix.cells().keys().map(|&c| (c, matrix.rank(&e.alias, c))).collect::<BTreeMap<_, _>>();
                (e, cells)
            })
            .collect()
    };

    let all_rounds: BTreeSet<NaiveDate> = scored_rounds.iter().copied().collect();
    let cell_summaries = |alias: &str, ranks: Option<&BTreeMap<Cell, Option<f64>>>| -> Vec<CellSummary> {
        let Some(cells) = grouped.get(alias) else { return Vec::new() };
        cells
            .iter()
            .map(|(&(target, horizon), rs)| {
                let owned: Vec<ScoreRecord> = rs.iter().map(|r| (*r).clone()).collect();
                let (coverage_50, coverage_95) = coverage_rate(&owned).expect("non-empty single-cell group");
                CellSummary {
                    target,
                    horizon,
                    n_rounds: rs.len(),
                    mean_score: mean(rs.iter().map(|r| r.mean_quantile_score)),
                    completed_score: completed.get(&(target, horizon)).and_then(|m| m.get(alias)).copied(),
                    skill: own_round_skill(rs, &bench),
                    rank: ranks.and_then(|m| m.get(&(target, horizon)).copied().flatten()),
                    coverage_50,
                    coverage_95,
                }
            })
            .collect()
    };
    let missed_rounds = |alias: &str| {
        let own = submitted.get(alias).cloned().unwrap_or_default();
        all_rounds.difference(&own).count()
    };

    let mut rows = Vec::new();
    for (entry, ranks) in &ranking {
        let cells = cell_summaries(&entry.alias, Some(ranks));
        rows.push(LeaderboardRow {
            position: Some(entry.final_position),
            alias: entry.alias.clone(),
            reference: false,
            avg_rank: Some(entry.average_rank),
            best_rank: Some(entry.best_rank),
            temp_avg_rank: entry.temperature_average_rank,
            tiebreak: Some(entry.tiebreak_applied.as_str().to_string()),
            summed_skill: cells.iter().filter_map(|c| c.skill).sum(),
            missed_rounds: missed_rounds(&entry.alias),
            cells,
        });
    }
    for alias in REFERENCE_ALIASES.into_iter().filter(|a| grouped.contains_key(a)) {
        let cells = cell_summaries(alias, None);
        rows.push(LeaderboardRow {
            position: None,
            alias: alias.to_string(),
            reference: true,
            avg_rank: None,
            best_rank: None,
            temp_avg_rank: None,
            tiebreak: None,
            summed_skill: cells.iter().filter_map(|c| c.skill).sum(),
            missed_rounds: 0,
            cells,
        });
    }

    let mut coverage = Vec::new();
    for (alias, cells) in &grouped {
        for (&(target, horizon), rs) in cells {
            let owned: Vec<ScoreRecord> = rs.iter().map(|r| (*r).clone()).collect();
            let (coverage_50, coverage_95) = coverage_rate(&owned).expect("non-empty single-cell group");
            let (mean_len_50, mean_len_95) = mean_interval_lengths(&owned).expect("non-empty single-cell group");
            coverage.push(CoverageRow {
                alias: alias.to_string(),
                target,
                horizon,
                n: rs.len(),
                coverage_50,
                coverage_95,
                mean_len_50,
                mean_len_95,
            });
        }
    }

    let participant_records: Vec<ScoreRecord> =
        records.iter().filter(|r| is_participant(&r.participant)).cloned().collect();
    let benchmark_records: Vec<ScoreRecord> =
        records.iter().filter(|r| r.participant == "benchmark").cloned().collect();
    let mut shares = Vec::new();
    for &round in scored_rounds {
        for &target in round_targets.get(&round).map(Vec::as_slice).unwrap_or_default() {
            let submitters = participant_records
                .iter()
                .filter(|r| r.round_date == round && r.target == target)
                .map(|r| r.participant.as_str())
                .collect::<BTreeSet<_>>()
                .len();
            let share = share_beating_benchmark(round, target, &participant_records, &benchmark_records)?;
            shares.push(ShareRow { round_date: round, target, share, submitters });
        }
    }

    let by_cell: Vec<CellCount> = evaluable
        .iter()
        .map(|(&(target, horizon), rounds)| CellCount { target, horizon, pairs: rounds.len() })
        .collect();
    let mut by_target = BTreeMap::new();
    for c in &by_cell {
        *by_target.entry(c.target).or_insert(0) += c.pairs;
    }
    let sample_count = SampleCount { total: by_cell.iter().map(|c| c.pairs).sum(), by_target, by_cell };

    let participation = submitted
        .iter()
        .filter(|(a, _)| is_participant(a))
        .map(|(alias, own)| {
            let missed: Vec<NaiveDate> = all_rounds.difference(own).copied().collect();
            Participation {
                alias: alias.clone(),
                submitted: own.intersection(&all_rounds).copied().collect(),
                flagged: missed.len() > ALLOWED_SKIPS,
                missed,
            }
        })
        .collect();

    Ok(Publication {
        leaderboard: Leaderboard { seed, scored_rounds: scored_rounds.to_vec(), rows },
        coverage,
        share_beating_benchmark: shares,
        sample_count,
        participation,
    })
}

impl Hub {
    /// Recomputes the leaderboard and analyses from every scored round and
    /// writes them to the store.
    pub fn publish(&self) -> Result<Publication, HubError> {
        let state = self.store().state()?;
        let scored: Vec<NaiveDate> =
            state.rounds.iter().filter(|(_, e)| e.status == RoundStatus::Scored).map(|(&d, _)| d).collect();
        let round_targets = state.rounds.iter().map(|(&d, e)| (d, e.targets.clone())).collect();
        let mut submitted: BTreeMap<String, BTreeSet<NaiveDate>> = BTreeMap::new();
        for &date in state.rounds.keys() {
            for alias in self.store().submission_index(date)?.accepted_aliases() {
                submitted.entry(alias.to_string()).or_default().insert(date);
            }
        }
        let records = self.all_records()?;
        let publication = build(&records, &scored, &round_targets, &submitted, self.config().seed)
            .map_err(HubError::Ranking)?;

        let store = self.store();
        atomic_write(&store.leaderboard_json_path(), to_json(&publication.leaderboard).as_bytes())?;
        atomic_write(&store.leaderboard_csv_path(), publication.leaderboard.to_csv().as_bytes())?;
        atomic_write(&store.analysis_path("coverage"), to_json(&publication.coverage).as_bytes())?;
        atomic_write(
            &store.analysis_path("share_beating_benchmark"),
            to_json(&publication.share_beating_benchmark).as_bytes(),
        )?;
        atomic_write(&store.analysis_path("sample_count"), to_json(&publication.sample_count).as_bytes())?;
        atomic_write(&store.analysis_path("participation"), to_json(&publication.participation).as_bytes())?;
        Ok(publication)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qhub_core::scoring::score_forecast;
    use qhub_core::QuantileForecast;

    fn rec(alias: &str, round: &str, q: [f64; 5], y: f64) -> ScoreRecord {
        let f = QuantileForecast::new(TargetKind::Dax, Horizon::days(1), round.parse().unwrap(), q).unwrap();
        score_forecast(alias, &f, y).unwrap()
    }

    #[test]
    fn imputes_missed_rounds_and_ranks() {
        let r1: NaiveDate = "2021-11-03".parse().unwrap();
        let r2: NaiveDate = "2021-11-10".parse().unwrap();
        let wide = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let sharp = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let records = vec![
            rec("benchmark", "2021-11-03", wide, 0.0),
            rec("benchmark", "2021-11-10", wide, 0.0),
            rec("good", "2021-11-03", sharp, 0.0),
            rec("good", "2021-11-10", sharp, 0.0),
            rec("lazy", "2021-11-10", sharp, 0.0),
            rec("poor", "2021-11-03", wide, 3.0),
            rec("poor", "2021-11-10", wide, 3.0),
        ];
        let targets = BTreeMap::from([(r1, vec![TargetKind::Dax]), (r2, vec![TargetKind::Dax])]);
        let submitted = BTreeMap::from([
            ("good".to_string(), BTreeSet::from([r1, r2])),
            ("lazy".to_string(), BTreeSet::from([r2])),
            ("poor".to_string(), BTreeSet::from([r1, r2])),
        ]);
        let p = build(&records, &[r1, r2], &targets, &submitted, 7).unwrap();
        let ranked: Vec<&str> = p.leaderboard.ranked().map(|r| r.alias.as_str()).collect();
        // Half a round of the penalty still beats two poor rounds.
        assert_eq!(ranked, vec!["good", "lazy", "poor"]);
        let lazy = p.leaderboard.rows.iter().find(|r| r.alias == "lazy").unwrap();
        let poor_avg = p.leaderboard.rows.iter().find(|r| r.alias == "poor").unwrap().cells[0].mean_score;
        let expected = (lazy.cells[0].mean_score + 1.01 * poor_avg) / 2.0;
        assert!((lazy.cells[0].completed_score.unwrap() - expected).abs() < 1e-12);
        assert_eq!(lazy.missed_rounds, 1);
        let bench = p.leaderboard.rows.iter().find(|r| r.alias == "benchmark").unwrap();
        assert!(bench.reference && bench.position.is_none());
        assert_eq!(bench.cells[0].skill, Some(0.0));
        assert_eq!(p.sample_count.total, 2);
        assert_eq!(p.share_beating_benchmark[0].share, Some(0.5));
        assert!(p.leaderboard.to_csv().starts_with("position,alias,avg_rank,best_rank,temp_avg_rank,tiebreak\n1,good,"));
    }
}
