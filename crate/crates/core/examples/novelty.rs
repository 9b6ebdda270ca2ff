//! Keep only generated instructions that are novel relative to a pool.

use corpusprep::dedup::{novelty_filter, rouge_l};

fn main() -> corpusprep::Result<()> {
    let pool = vec!["Napiši kratko pesem o morju.".to_owned()];
    let candidates = [
        "Napiši kratko pesem o morju in soncu.",
        "Povzemi ta članek v treh stavkih.",
        "Napiši kratko pesem o morju.",
    ];
    for c in &candidates {
        println!("{:.3}  {c}", rouge_l(c, &pool[0]));
    }
    let kept = novelty_filter(candidates, &pool, 0.7)?;
    println!("kept: {kept:?}");
    Ok(())
}
