//! Score pairwise arena votes with ELO.

use corpusprep::leaderboard::{compute_leaderboard, render_leaderboard, Outcome, VoteRecord, DEFAULT_INITIAL, DEFAULT_K};

fn main() -> corpusprep::Result<()> {
    let mut votes = Vec::new();
    for i in 0..30 {
        let outcome = match i % 5 {
            0..=2 => Outcome::AWins,
            3 => Outcome::Tie,
            _ => Outcome::BothBad,
        };
        votes.push(VoteRecord::new("model-a", "model-b", outcome));
        votes.push(VoteRecord::new("model-b", "model-c", if i % 3 == 0 { Outcome::BWins } else { Outcome::AWins }));
    }
    let (rows, _) = compute_leaderboard(&votes, DEFAULT_K, DEFAULT_INITIAL)?;
    print!("{}", render_leaderboard(&rows));
    Ok(())
}
