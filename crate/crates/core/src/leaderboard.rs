//! Arena ELO ratings with win rates, and average-rank leaderboards over a
//! benchmark score matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: f64 = 32.0;
pub const DEFAULT_INITIAL: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
    BothBad,
}

impl Outcome {
    /// Score for model A; both_bad rates like a tie.
    pub fn score_a(self) -> f64 {
        match self {
            Outcome::AWins => 1.0,
            Outcome::BWins => 0.0,
            Outcome::Tie | Outcome::BothBad => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub model_a: String,
    pub model_b: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub timestamp: i64,
}

impl VoteRecord {
    pub fn new(a: impl Into<String>, b: impl Into<String>, outcome: Outcome) -> Self {
        VoteRecord {
            model_a: a.into(),
            model_b: b.into(),
            outcome,
            timestamp: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub both_bad: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.wins + self.losses + self.ties + self.both_bad
    }

    /// wins / (wins + losses); ties and both-bad votes are discarded.
    pub fn win_rate(&self) -> Option<f64> {
        let decided = self.wins + self.losses;
        (decided > 0).then(|| self.wins as f64 / decided as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    pub k_factor: f64,
    pub initial: f64,
    pub ratings: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, OutcomeCounts>,
}

impl Default for RatingTable {
    fn default() -> Self {
        RatingTable::new(DEFAULT_K, DEFAULT_INITIAL).unwrap()
    }
}

pub fn expected_score(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

impl RatingTable {
    pub fn new(k_factor: f64, initial: f64) -> Result<Self> {
        if !(k_factor > 0.0 && k_factor.is_finite()) {
            return Err(Error::Config(format!("k factor must be positive, got {k_factor}")));
        }
        if !initial.is_finite() {
            return Err(Error::Config(format!("initial rating must be finite, got {initial}")));
        }
        Ok(RatingTable {
            k_factor,
            initial,
            ratings: BTreeMap::new(),
            counts: BTreeMap::new(),
        })
    }

    pub fn rating(&self, model: &str) -> f64 {
        self.ratings.get(model).copied().unwrap_or(self.initial)
    }

    /// Apply one vote. Both ratings move by the same amount in opposite
    /// directions.
    pub fn update(&mut self, vote: &VoteRecord) -> Result<()> {
        if vote.model_a == vote.model_b {
            return Err(Error::InvalidVote(format!(
                "model {:?} voted against itself",
                vote.model_a
            )));
        }
        let ra = self.rating(&vote.model_a);
        let rb = self.rating(&vote.model_b);
        let delta = self.k_factor * (vote.outcome.score_a() - expected_score(ra, rb));
        self.ratings.insert(vote.model_a.clone(), ra + delta);
        self.ratings.insert(vote.model_b.clone(), rb - delta);

        let (a, b) = match vote.outcome {
            Outcome::AWins => (
                OutcomeCounts { wins: 1, ..Default::default() },
                OutcomeCounts { losses: 1, ..Default::default() },
            ),
            Outcome::BWins => (
                OutcomeCounts { losses: 1, ..Default::default() },
                OutcomeCounts { wins: 1, ..Default::default() },
            ),
            Outcome::Tie => {
                let t = OutcomeCounts { ties: 1, ..Default::default() };
                (t, t)
            }
            Outcome::BothBad => {
                let t = OutcomeCounts { both_bad: 1, ..Default::default() };
                (t, t)
            }
        };
        for (model, add) in [(&vote.model_a, a), (&vote.model_b, b)] {
            let c = self.counts.entry(model.clone()).or_default();
            c.wins += add.wins;
            c.losses += add.losses;
            c.ties += add.ties;
            c.both_bad += add.both_bad;
        }
        Ok(())
    }
}

/// Functional form of [`RatingTable::update`].
pub fn elo_update(mut table: RatingTable, vote: &VoteRecord) -> Result<RatingTable> {
    table.update(vote)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model: String,
    pub rating: f64,
    pub win_rate: Option<f64>,
    pub total_votes: u64,
}

/// Fold votes in timestamp order (stable for equal timestamps) and rank
/// models by rating, highest first.
pub fn compute_leaderboard(votes: &[VoteRecord], k_factor: f64, initial: f64) -> Result<(Vec<LeaderboardRow>, RatingTable)> {
    let mut table = RatingTable::new(k_factor, initial)?;
    let mut ordered: Vec<&VoteRecord> = votes.iter().collect();
    ordered.sort_by_key(|v| v.timestamp);
    for v in ordered {
        table.update(v)?;
    }
    let mut rows: Vec<LeaderboardRow> = table
        .ratings
        .iter()
        .map(|(model, &rating)| {
            let c = table.counts[model];
            LeaderboardRow {
                rank: 0,
                model: model.clone(),
                rating,
                win_rate: c.win_rate(),
                total_votes: c.total(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.rating.total_cmp(&a.rating).then_with(|| a.model.cmp(&b.model)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok((rows, table))
}

pub fn format_win_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "—".to_owned(), |r| format!("{:.1}%", 100.0 * r))
}

/// Rank, Model, ELO Score, Win Rate, Total Votes.
pub fn render_leaderboard(rows: &[LeaderboardRow]) -> String {
    let width = rows.iter().map(|r| r.model.chars().count()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = writeln!(s, "{:>4}  {:<width$}  {:>9}  {:>8}  {:>11}", "Rank", "Model", "ELO Score", "Win Rate", "Total Votes");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>4}  {:<width$}  {:>9.0}  {:>8}  {:>11}",
            r.rank,
            r.model,
            r.rating,
            format_win_rate(r.win_rate),
            r.total_votes
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    /// (benchmark, metric) per row.
    pub benchmarks: Vec<(String, String)>,
    pub models: Vec<String>,
    /// Row-major: `scores[row][model]`, higher is better.
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(benchmarks: Vec<(String, String)>, models: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        let m = ScoreMatrix {
            benchmarks,
            models,
            scores,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.benchmarks.len() {
            return Err(Error::Shape(format!(
                "{} benchmark names for {} score rows",
                self.benchmarks.len(),
                self.scores.len()
            )));
        }
        for (row, (name, _)) in self.scores.iter().zip(&self.benchmarks) {
            if row.len() != self.models.len() {
                return Err(Error::Shape(format!(
                    "row {name:?} has {} scores for {} models",
                    row.len(),
                    self.models.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| v.is_nan()) {
                return Err(Error::Shape(format!("row {name:?} has a non-numeric score {v}")));
            }
        }
        Ok(())
    }

    /// Parse a delimited table with header `benchmark,metric,<model>...`.
    /// The metric column may be omitted (header `benchmark,<model>...`).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::parse("header", e.to_string()))?
            .clone();
        let has_metric = header.get(1).is_some_and(|h| h.eq_ignore_ascii_case("metric"));
        let skip = if has_metric { 2 } else { 1 };
        let models: Vec<String> = header.iter().skip(skip).map(str::to_owned).collect();
        if models.is_empty() {
            return Err(Error::Shape("score matrix has no model columns".into()));
        }
        let mut benchmarks = Vec::new();
        let mut scores = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Shape(format!("line {line}: {e}")))?;
            let name = rec.get(0).unwrap_or_default().to_owned();
            let metric = if has_metric { rec.get(1).unwrap_or_default().to_owned() } else { String::new() };
            let row = rec
                .iter()
                .skip(skip)
                .map(|cell| {
                    f64::from_str(cell)
                        .map_err(|_| Error::parse("score", format!("{cell:?} is not a number")).at_line(line))
                })
                .collect::<Result<Vec<f64>>>()?;
            benchmarks.push((name, metric));
            scores.push(row);
        }
        ScoreMatrix::new(benchmarks, models, scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Tied models share the mean of the ranks they cover.
    #[default]
    Fractional,
    /// Tied models all take the best rank they cover ("1224").
    Competition,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fractional" => Ok(TieRule::Fractional),
            "competition" => Ok(TieRule::Competition),
            other => Err(Error::Config(format!("unknown tie rule {other:?}"))),
        }
    }
}

/// Rank one row of scores, 1 for the highest.
pub fn rank_row(scores: &[f64], rule: TieRule) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let rank = match rule {
            TieRule::Fractional => (start + 1 + end) as f64 / 2.0,
            TieRule::Competition => (start + 1) as f64,
        };
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub model: String,
    pub average_rank: f64,
}

/// Average per-row rank of each model, best (lowest) first. Models with equal
/// averages keep their column order.
pub fn average_rank(matrix: &ScoreMatrix, rule: TieRule) -> Result<Vec<RankRow>> {
    matrix.validate()?;
    if matrix.scores.is_empty() {
        return Err(Error::Shape("score matrix has no rows".into()));
    }
    let mut sums = vec![0.0; matrix.models.len()];
    for row in &matrix.scores {
        for (s, r) in sums.iter_mut().zip(rank_row(row, rule)) {
            *s += r;
        }
    }
    let n = matrix.scores.len() as f64;
    let mut out: Vec<RankRow> = matrix
        .models
        .iter()
        .zip(sums)
        .map(|(m, s)| RankRow {
            model: m.clone(),
            average_rank: s / n,
        })
        .collect();
    out.sort_by(|a, b| a.average_rank.total_cmp(&b.average_rank));
    Ok(out)
}

/// Model, Average rank.
pub fn render_ranking(rows: &[RankRow]) -> String {
    let width = rows.iter().map(|r| r.model.chars().count()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>12}", "Model", "Average rank");
    for r in rows {
        let _ = writeln!(s, "{:<width$}  {:>12.2}", r.model, r.average_rank);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elo_examples() {
        let mut t = RatingTable::default();
        t.update(&VoteRecord::new("a", "b", Outcome::AWins)).unwrap();
        assert_eq!(t.rating("a"), 1016.0);
        assert_eq!(t.rating("b"), 984.0);

        let mut t = RatingTable::default();
        t.update(&VoteRecord::new("a", "b", Outcome::Tie)).unwrap();
        assert_eq!(t.rating("a"), 1000.0);
        assert_eq!(t.rating("b"), 1000.0);

        let mut t = RatingTable::default();
        t.ratings.insert("a".into(), 1016.0);
        t.update(&VoteRecord::new("a", "b", Outcome::AWins)).unwrap();
        let oracle = 1016.0 + 32.0 * (1.0 - 1.0 / (1.0 + 10f64.powf(-16.0 / 400.0)));
        assert!((t.rating("a") - oracle).abs() < 1e-12);
        assert!((t.rating("a") - 1031.26).abs() < 0.01);
    }

    #[test]
    fn self_vote_rejected() {
        let mut t = RatingTable::default();
        let err = t.update(&VoteRecord::new("a", "a", Outcome::Tie)).unwrap_err();
        assert!(matches!(err, Error::InvalidVote(_)));
        assert!(RatingTable::new(0.0, 1000.0).is_err());
    }

    #[test]
    fn win_rates() {
        let mut votes = Vec::new();
        for i in 0..5 {
            votes.push(VoteRecord::new("gemini", format!("m{i}"), Outcome::AWins));
        }
        votes.push(VoteRecord::new("x", "gemini", Outcome::AWins));
        votes.push(VoteRecord::new("mini", "y", Outcome::AWins));
        votes.push(VoteRecord::new("p", "q", Outcome::Tie));
        let (rows, table) = compute_leaderboard(&votes, DEFAULT_K, DEFAULT_INITIAL).unwrap();
        let row = |m: &str| rows.iter().find(|r| r.model == m).unwrap();
        assert_eq!(format_win_rate(row("gemini").win_rate), "83.3%");
        assert_eq!(row("gemini").total_votes, 6);
        assert_eq!(format_win_rate(row("mini").win_rate), "100.0%");
        assert_eq!(row("mini").total_votes, 1);
        assert_eq!(row("p").win_rate, None);
        assert_eq!(row("p").total_votes, 1);
        let sum: f64 = table.ratings.values().sum();
        assert!((sum - 1000.0 * table.ratings.len() as f64).abs() < 1e-9);
        assert!(rows.windows(2).all(|w| w[0].rating >= w[1].rating));
        assert!(render_leaderboard(&rows).contains("ELO Score"));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_row(&[0.9, 0.5, 0.5, 0.1], TieRule::Fractional), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank_row(&[0.9, 0.5, 0.5, 0.1], TieRule::Competition), vec![1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn dominance_and_shape() {
        let m = ScoreMatrix::new(
            vec![("b1".into(), "acc".into()), ("b2".into(), "acc".into())],
            vec!["x".into(), "y".into()],
            vec![vec![0.9, 0.1], vec![0.8, 0.2]],
        )
        .unwrap();
        let r = average_rank(&m, TieRule::Fractional).unwrap();
        assert_eq!(r[0].model, "x");
        assert_eq!(r[0].average_rank, 1.0);

        let bad = ScoreMatrix::new(vec![("b".into(), "".into())], vec!["x".into(), "y".into()], vec![vec![1.0]]);
        assert!(matches!(bad, Err(Error::Shape(_))));
    }

    #[test]
    fn csv_matrix() {
        let csv = "benchmark,metric,a,b\nARC,acc,0.5,0.6\nPIQA,acc,0.7,0.6\n";
        let m = ScoreMatrix::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(m.models, vec!["a", "b"]);
        assert_eq!(m.benchmarks[1], ("PIQA".into(), "acc".into()));
        let r = average_rank(&m, TieRule::Fractional).unwrap();
        assert_eq!(r[0].average_rank, 1.5);
        assert!(render_ranking(&r).contains("1.50"));
        assert!(ScoreMatrix::from_csv("benchmark,metric,a\nARC,acc,x\n".as_bytes()).is_err());
        assert!(ScoreMatrix::from_csv("benchmark,metric,a,b\nARC,acc,0.1\n".as_bytes()).is_err());
    }
}
