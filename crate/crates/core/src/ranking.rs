//! Overall leaderboard: penalty imputation for missed rounds, fractional
//! per-cell ranks, average-rank aggregation with a tiebreak cascade, and the
//! weekly share of participants beating the benchmark.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Horizon, TargetKind};
use crate::scoring::ScoreRecord;

/// A missed round scores this multiple of the worst participant average.
pub const IMPUTATION_FACTOR: f64 = 1.01;

pub type Cell = (TargetKind, Horizon);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("no participant submitted for {0} {1}")]
    NoSubmissions(TargetKind, Horizon),
    #[error("score for {alias} on {round} falls outside the evaluable rounds")]
    UnknownRound { alias: String, round: NaiveDate },
    #[error("non-finite score {value} for {alias}")]
    NonFinite { alias: String, value: f64 },
    #[error("{alias} has no score in {target} {horizon}")]
    MissingScore { alias: String, target: TargetKind, horizon: Horizon },
    #[error("rank matrix has no cells")]
    NoCells,
    #[error("rank matrix has no participants")]
    NoParticipants,
    #[error("duplicate participant {0}")]
    DuplicateParticipant(String),
    #[error("cell {target} {horizon} has {got} ranks for {expected} participants")]
    RankCount { target: TargetKind, horizon: Horizon, expected: usize, got: usize },
    #[error("benchmark has no scores for {target} in the round of {round}")]
    BenchmarkMissing { target: TargetKind, round: NaiveDate },
}

/// One (target, horizon) cell after imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedCell {
    /// Average over all evaluable rounds, penalties included.
    pub completed: BTreeMap<String, f64>,
    /// Per-round penalty applied to missed rounds.
    pub penalty: f64,
    pub missed: BTreeMap<String, Vec<NaiveDate>>,
}

/// Completes per-participant averages for one cell.
///
/// `scores` maps alias to that participant's per-round mean quantile scores.
/// Every alias in `participants` receives a completed average over `rounds`;
/// each round they lack is filled with `IMPUTATION_FACTOR` times the worst
/// submitted-rounds average among participants in the cell.
pub fn impute_missing(
    cell: Cell,
    rounds: &[NaiveDate],
    participants: &[String],
    scores: &BTreeMap<String, BTreeMap<NaiveDate, f64>>,
) -> Result<ImputedCell, RankingError> {
    let evaluable: BTreeSet<NaiveDate> = rounds.iter().copied().collect();
    let mut worst: Option<f64> = None;
    for (alias, per_round) in scores {
        if per_round.is_empty() {
            continue;
        }
        for (&round, &value) in per_round {
            if !evaluable.contains(&round) {
                return Err(RankingError::UnknownRound { alias: alias.clone(), round });
            }
            if !value.is_finite() {
                return Err(RankingError::NonFinite { alias: alias.clone(), value });
            }
        }
        let avg = per_round.values().sum::<f64>() / per_round.len() as f64;
        worst = Some(worst.map_or(avg, |w| w.max(avg)));
    }
    let worst = worst.ok_or(RankingError::NoSubmissions(cell.0, cell.1))?;
    let penalty = IMPUTATION_FACTOR * worst;

    let empty = BTreeMap::new();
    let mut completed = BTreeMap::new();
    let mut missed = BTreeMap::new();
    for alias in participants {
        let own = scores.get(alias).unwrap_or(&empty);
        let mut total = 0.0;
        let mut gaps = Vec::new();
        for &round in &evaluable {
            match own.get(&round) {
                Some(v) => total += v,
                None => {
                    total += penalty;
                    gaps.push(round);
                }
            }
        }
        completed.insert(alias.clone(), total / evaluable.len() as f64);
        if !gaps.is_empty() {
            missed.insert(alias.clone(), gaps);
        }
    }
    Ok(ImputedCell { completed, penalty, missed })
}

/// Ranks of `values` where smaller is better; ties share the average of
/// their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1..=j share their mean.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankMatrix {
    participants: Vec<String>,
    cells: BTreeMap<Cell, Vec<f64>>,
}

impl RankMatrix {
    /// Ranks in each cell are aligned with `participants`.
    pub fn new(participants: Vec<String>, cells: BTreeMap<Cell, Vec<f64>>) -> Result<Self, RankingError> {
        if participants.is_empty() {
            return Err(RankingError::NoParticipants);
        }
        if cells.is_empty() {
            return Err(RankingError::NoCells);
        }
        let mut seen = BTreeSet::new();
        for p in &participants {
            if !seen.insert(p) {
                return Err(RankingError::DuplicateParticipant(p.clone()));
            }
        }
        for (&(target, horizon), ranks) in &cells {
            if ranks.len() != participants.len() {
                return Err(RankingError::RankCount { target, horizon, expected: participants.len(), got: ranks.len() });
            }
            if let Some(&value) = ranks.iter().find(|r| !r.is_finite()) {
                return Err(RankingError::NonFinite { alias: String::new(), value });
            }
        }
        Ok(Self { participants, cells })
    }

    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    pub fn cells(&self) -> &BTreeMap<Cell, Vec<f64>> {
        &self.cells
    }

    pub fn rank(&self, alias: &str, cell: Cell) -> Option<f64> {
        let i = self.participants.iter().position(|p| p == alias)?;
        self.cells.get(&cell).map(|r| r[i])
    }
}

/// Ranks participants within each cell by mean score, lower is better.
pub fn rank_cells(
    participants: &[String],
    scores: &BTreeMap<Cell, BTreeMap<String, f64>>,
) -> Result<RankMatrix, RankingError> {
    let mut cells = BTreeMap::new();
    for (&(target, horizon), by_alias) in scores {
        let mut values = Vec::with_capacity(participants.len());
        for alias in participants {
            let &v = by_alias
                .get(alias)
                .ok_or_else(|| RankingError::MissingScore { alias: alias.clone(), target, horizon })?;
            if !v.is_finite() {
                return Err(RankingError::NonFinite { alias: alias.clone(), value: v });
            }
            values.push(v);
        }
        cells.insert((target, horizon), fractional_ranks(&values));
    }
    RankMatrix::new(participants.to_vec(), cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tiebreak {
    None,
    BestRank,
    TemperatureRank,
    CoinFlip,
}

impl Tiebreak {
    pub fn as_str(self) -> &'static str {
        match self {
            Tiebreak::None => "none",
            Tiebreak::BestRank => "best_rank",
            Tiebreak::TemperatureRank => "temperature_rank",
            Tiebreak::CoinFlip => "coin_flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub alias: String,
    pub average_rank: f64,
    pub best_rank: f64,
    pub temperature_average_rank: Option<f64>,
    pub final_position: usize,
    pub tiebreak_applied: Tiebreak,
}

/// One pseudo-random key per alias, drawn in sorted alias order from a
/// generator seeded with `seed`. Lower keys win a coin flip.
pub fn tiebreak_draws(aliases: &[String], seed: u64) -> BTreeMap<String, u64> {
    let sorted: BTreeSet<&String> = aliases.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.into_iter().map(|a| (a.clone(), rng.random::<u64>())).collect()
}

struct Profile {
    index: usize,
    rank_sum: f64,
    best: f64,
    temperature_sum: Option<f64>,
    draw: u64,
}

fn compare(a: &Profile, b: &Profile) -> (Ordering, Tiebreak) {
    // Every participant has the same number of cells, so rank sums order
    // exactly like average ranks; sums of half-integers are exact.
    let by_average = a.rank_sum.total_cmp(&b.rank_sum);
    if by_average != Ordering::Equal {
        return (by_average, Tiebreak::None);
    }
    let by_best = a.best.total_cmp(&b.best);
    if by_best != Ordering::Equal {
        return (by_best, Tiebreak::BestRank);
    }
    if let (Some(x), Some(y)) = (a.temperature_sum, b.temperature_sum) {
        let by_temperature = x.total_cmp(&y);
        if by_temperature != Ordering::Equal {
            return (by_temperature, Tiebreak::TemperatureRank);
        }
    }
    (a.draw.cmp(&b.draw).then(a.index.cmp(&b.index)), Tiebreak::CoinFlip)
}

/// Orders participants by average cell rank, then best rank, then average
/// temperature rank, then a seeded draw.
pub fn overall_ranking(matrix: &RankMatrix, seed: u64) -> Vec<LeaderboardEntry> {
    let n_cells = matrix.cells.len() as f64;
    let temperature: Vec<&Vec<f64>> = matrix
        .cells
        .iter()
        .filter(|((t, _), _)| *t == TargetKind::Temperature)
        .map(|(_, r)| r)
        .collect();
    let draws = tiebreak_draws(&matrix.participants, seed);

    let profiles: Vec<Profile> = matrix
        .participants
        .iter()
        .enumerate()
        .map(|(i, alias)| Profile {
            index: i,
            rank_sum: matrix.cells.values().map(|r| r[i]).sum(),
            best: matrix.cells.values().map(|r| r[i]).fold(f64::INFINITY, f64::min),
            temperature_sum: (!temperature.is_empty()).then(|| temperature.iter().map(|r| r[i]).sum()),
            draw: draws[alias],
        })
        .collect();

    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| compare(&profiles[a], &profiles[b]).0);

    order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let p = &profiles[i];
            let tiebreak_applied = profiles
                .iter()
                .filter(|q| q.index != i && q.rank_sum == p.rank_sum)
                .map(|q| compare(p, q).1)
                .max()
                .unwrap_or(Tiebreak::None);
            LeaderboardEntry {
                alias: matrix.participants[i].clone(),
                average_rank: p.rank_sum / n_cells,
                best_rank: p.best,
                temperature_average_rank: p.temperature_sum.map(|s| s / temperature.len() as f64),
                final_position: pos + 1,
                tiebreak_applied,
            }
        })
        .collect()
}

/// Fraction of the round's submitters whose mean score over the target's
/// scored horizons is strictly below the benchmark's. `None` when nobody
/// submitted.
///
/// The horizons are those the benchmark was scored on that round (all five
/// unless an observation is missing); participants lacking any of them are
/// left out.
pub fn share_beating_benchmark(
    round: NaiveDate,
    target: TargetKind,
    records: &[ScoreRecord],
    benchmark: &[ScoreRecord],
) -> Result<Option<f64>, RankingError> {
    let in_round = |r: &&ScoreRecord| r.round_date == round && r.target == target && !r.imputed;
    let bench: BTreeMap<Horizon, f64> =
        benchmark.iter().filter(in_round).map(|r| (r.horizon, r.mean_quantile_score)).collect();
    if bench.is_empty() {
        return Err(RankingError::BenchmarkMissing { target, round });
    }
    let bench_mean = bench.values().sum::<f64>() / bench.len() as f64;

    let mut by_alias: BTreeMap<&str, BTreeMap<Horizon, f64>> = BTreeMap::new();
    for r in records.iter().filter(in_round) {
        by_alias.entry(r.participant.as_str()).or_default().insert(r.horizon, r.mean_quantile_score);
    }
    let means: Vec<f64> = by_alias
        .values()
        .filter(|h| bench.keys().all(|k| h.contains_key(k)))
        .map(|h| bench.keys().map(|k| h[k]).sum::<f64>() / bench.len() as f64)
        .collect();
    if means.is_empty() {
        return Ok(None);
    }
    let beating = means.iter().filter(|&&m| m < bench_mean).count();
    Ok(Some(beating as f64 / means.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    const CELL: Cell = (TargetKind::Dax, Horizon::days(1));

    #[test]
    fn fractional_rank_examples() {
        assert_eq!(fractional_ranks(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(fractional_ranks(&[1.0, 1.0, 3.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(fractional_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(fractional_ranks(&[3.0, 1.0, 2.0, 1.0]), vec![4.0, 1.5, 3.0, 1.5]);
    }

    #[test]
    fn imputation_examples() {
        let rounds: Vec<NaiveDate> = (0..13).map(|w| d("2021-11-03") + chrono::Duration::weeks(w)).collect();
        let mut scores = BTreeMap::new();
        scores.insert("worst".to_string(), rounds.iter().map(|&r| (r, 10.0)).collect());
        scores.insert("gap".to_string(), rounds[1..].iter().map(|&r| (r, 4.0)).collect());
        let participants = vec!["absent".to_string(), "gap".to_string(), "worst".to_string()];
        let cell = impute_missing(CELL, &rounds, &participants, &scores).unwrap();
        assert!((cell.completed["absent"] - 10.1).abs() < 1e-12);
        assert!((cell.completed["gap"] - (12.0 * 4.0 + 10.1) / 13.0).abs() < 1e-12);
        assert_eq!(cell.completed["worst"], 10.0);
        assert_eq!(cell.missed["gap"], vec![rounds[0]]);
        assert!(!cell.missed.contains_key("worst"));

        let full = impute_missing(CELL, &rounds, &participants[2..], &scores).unwrap();
        assert_eq!(full.completed["worst"], 10.0);
        assert!(full.missed.is_empty());

        assert_eq!(
            impute_missing(CELL, &rounds, &participants, &BTreeMap::new()),
            Err(RankingError::NoSubmissions(TargetKind::Dax, Horizon::days(1)))
        );
        let mut stray = BTreeMap::new();
        stray.insert("x".to_string(), BTreeMap::from([(d("2030-01-02"), 1.0)]));
        assert!(matches!(impute_missing(CELL, &rounds, &participants, &stray), Err(RankingError::UnknownRound { .. })));
    }

    fn matrix(ranks: &[(Cell, Vec<f64>)]) -> RankMatrix {
        RankMatrix::new(names(ranks[0].1.len()), ranks.iter().cloned().collect()).unwrap()
    }

    #[test]
    fn overall_examples() {
        let c = |h| (TargetKind::Dax, Horizon::days(h));
        // Average ranks 1.4 and 1.6.
        let m = matrix(&[
            (c(1), vec![1.0, 2.0]),
            (c(2), vec![1.0, 2.0]),
            (c(5), vec![2.0, 1.0]),
            (c(6), vec![2.0, 1.0]),
            (c(7), vec![1.0, 2.0]),
        ]);
        let lb = overall_ranking(&m, 1);
        assert_eq!((lb[0].alias.as_str(), lb[0].final_position), ("p0", 1));
        assert!((lb[0].average_rank - 1.4).abs() < 1e-12);
        assert!(lb.iter().all(|e| e.tiebreak_applied == Tiebreak::None));

        let m = matrix(&[(c(1), vec![2.0, 1.0, 3.0]), (c(2), vec![2.0, 3.0, 1.0]), (c(5), vec![2.0, 2.0, 2.0])]);
        let lb = overall_ranking(&m, 1);
        assert_eq!(lb[2].alias, "p0");
        assert_eq!(lb[2].tiebreak_applied, Tiebreak::BestRank);
        assert_eq!(lb[0].tiebreak_applied, Tiebreak::CoinFlip);
    }

    #[test]
    fn temperature_tiebreak() {
        let t = (TargetKind::Temperature, Horizon::hours(36));
        let w = (TargetKind::Wind, Horizon::hours(36));
        let m = matrix(&[(t, vec![2.0, 1.0]), (w, vec![1.0, 2.0])]);
        let lb = overall_ranking(&m, 9);
        assert_eq!(lb[0].alias, "p1");
        assert_eq!(lb[1].tiebreak_applied, Tiebreak::TemperatureRank);

        let t2 = (TargetKind::Temperature, Horizon::hours(48));
        let m = matrix(&[(t, vec![2.0, 1.0]), (t2, vec![2.0, 1.0]), (w, vec![1.0, 3.0]), ((TargetKind::Dax, Horizon::days(1)), vec![3.0, 3.0])]);
        let lb = overall_ranking(&m, 9);
        assert_eq!(lb[0].alias, "p1");
        assert_eq!(lb[0].tiebreak_applied, Tiebreak::TemperatureRank);
        assert_eq!(lb[0].temperature_average_rank, Some(1.0));
    }

    #[test]
    fn coin_flip_is_seeded() {
        let m = matrix(&[(CELL, vec![1.0; 6])]);
        let a = overall_ranking(&m, 42);
        assert_eq!(a, overall_ranking(&m, 42));
        assert!(a.iter().all(|e| e.tiebreak_applied == Tiebreak::CoinFlip));
        let orders: BTreeSet<Vec<String>> =
            (0..20).map(|s| overall_ranking(&m, s).into_iter().map(|e| e.alias).collect()).collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn matrix_validation() {
        assert_eq!(RankMatrix::new(vec![], BTreeMap::from([(CELL, vec![])])), Err(RankingError::NoParticipants));
        assert_eq!(RankMatrix::new(names(1), BTreeMap::new()), Err(RankingError::NoCells));
        assert!(matches!(RankMatrix::new(names(2), BTreeMap::from([(CELL, vec![1.0])])), Err(RankingError::RankCount { .. })));
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(RankMatrix::new(dup, BTreeMap::from([(CELL, vec![1.0, 2.0])])).is_err());
        let scores = BTreeMap::from([(CELL, BTreeMap::from([("p0".to_string(), 1.0)]))]);
        assert!(matches!(rank_cells(&names(2), &scores), Err(RankingError::MissingScore { .. })));
    }

    fn rec(alias: &str, h: u32, score: f64) -> ScoreRecord {
        ScoreRecord {
            participant: alias.to_string(),
            target: TargetKind::Temperature,
            horizon: Horizon::hours(h),
            round_date: d("2021-11-03"),
            quantile_scores: [score; 5],
            mean_quantile_score: score,
            abs_error: 0.0,
            covered_50: true,
            covered_95: true,
            len_50: 0.0,
            len_95: 0.0,
            imputed: false,
        }
    }

    fn all_h(alias: &str, score: f64) -> Vec<ScoreRecord> {
        TargetKind::Temperature.horizons().iter().map(|h| rec(alias, h.magnitude, score)).collect()
    }

    #[test]
    fn share_examples() {
        let bench = all_h("benchmark", 2.0);
        let mut recs = Vec::new();
        for (a, s) in [("a", 1.0), ("b", 1.5), ("c", 3.0), ("e", 2.0)] {
            recs.extend(all_h(a, s));
        }
        let round = d("2021-11-03");
        assert_eq!(share_beating_benchmark(round, TargetKind::Temperature, &recs, &bench), Ok(Some(0.5)));
        assert_eq!(share_beating_benchmark(round, TargetKind::Temperature, &[], &bench), Ok(None));
        assert!(share_beating_benchmark(round, TargetKind::Wind, &recs, &bench).is_err());
        let equal = all_h("e", 2.0);
        assert_eq!(share_beating_benchmark(round, TargetKind::Temperature, &equal, &bench), Ok(Some(0.0)));
    }

    fn score_table() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
        (1usize..6, 1usize..5).prop_flat_map(|(n, cells)| {
            (Just(n), prop::collection::vec(prop::collection::vec(prop::sample::select(vec![1.0, 2.0, 3.0, 4.5]), n), cells))
        })
    }

    fn cell_key(i: usize) -> Cell {
        let target = TargetKind::ALL[i % 3];
        (target, target.horizons()[i / 3])
    }

    fn board(n: usize, table: &[Vec<f64>], seed: u64) -> Vec<LeaderboardEntry> {
        let scores: BTreeMap<Cell, BTreeMap<String, f64>> = table
            .iter()
            .enumerate()
            .map(|(c, row)| (cell_key(c), names(n).into_iter().zip(row.iter().copied()).collect()))
            .collect();
        overall_ranking(&rank_cells(&names(n), &scores).unwrap(), seed)
    }

    proptest! {
        #[test]
        fn positions_are_a_permutation((n, table) in score_table(), seed in any::<u64>()) {
            let lb = board(n, &table, seed);
            let positions: Vec<usize> = lb.iter().map(|e| e.final_position).collect();
            prop_assert_eq!(positions, (1..=n).collect::<Vec<_>>());
            prop_assert!(lb.windows(2).all(|w| w[0].average_rank <= w[1].average_rank));
            prop_assert_eq!(&lb, &board(n, &table, seed));
        }

        #[test]
        fn improving_never_hurts((n, table) in score_table(), seed in any::<u64>(), who in any::<prop::sample::Index>(), cell in any::<prop::sample::Index>(), by in 0.1f64..5.0) {
            let who = who.index(n);
            let cell = cell.index(table.len());
            let before = board(n, &table, seed);
            let mut better = table.clone();
            better[cell][who] -= by;
            let after = board(n, &better, seed);
            let pos = |lb: &[LeaderboardEntry]| lb.iter().find(|e| e.alias == format!("p{who}")).unwrap().final_position;
            prop_assert!(pos(&after) <= pos(&before));
        }

        #[test]
        fn imputed_never_beats_worst_full(real in prop::collection::vec(0.1f64..50.0, 2..8), worst_extra in 0f64..10.0) {
            let rounds: Vec<NaiveDate> = (0..real.len() as i64).map(|w| d("2021-11-03") + chrono::Duration::weeks(w)).collect();
            let mut scores = BTreeMap::new();
            let worst_avg = real.iter().sum::<f64>() / real.len() as f64 + worst_extra;
            scores.insert("full".to_string(), rounds.iter().map(|&r| (r, worst_avg)).collect::<BTreeMap<_, _>>());
            scores.insert("gappy".to_string(), rounds[1..].iter().zip(&real[1..]).map(|(&r, &v)| (r, v)).collect());
            let participants = vec!["full".to_string(), "gappy".to_string(), "none".to_string()];
            let cell = impute_missing(CELL, &rounds, &participants, &scores).unwrap();
            prop_assert!(cell.penalty > worst_avg * 1.0);
            prop_assert!(cell.completed["none"] >= cell.completed["full"]);
        }
    }
}
