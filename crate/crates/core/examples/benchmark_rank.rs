//! Average per-benchmark ranks into a leaderboard.

use corpusprep::leaderboard::{average_rank, render_ranking, ScoreMatrix, TieRule};

const SCORES: &str = "\
benchmark,alpha,beta,gamma,delta
arc,0.61,0.58,0.61,0.40
hellaswag,0.72,0.75,0.70,0.55
boolq,0.81,0.79,0.83,0.80
";

fn main() -> corpusprep::Result<()> {
    let matrix = ScoreMatrix::from_csv(SCORES.as_bytes())?;
    for rule in [TieRule::Fractional, TieRule::Competition] {
        println!("{rule:?}");
        print!("{}", render_ranking(&average_rank(&matrix, rule)?));
    }
    Ok(())
}
