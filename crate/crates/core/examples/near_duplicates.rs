//! Remove near-duplicates with MinHash LSH, grouping by a metadata key.

use corpusprep::dedup::{dedup_corpus, estimate_jaccard, minhash, shingle, DedupConfig};
use corpusprep::Document;

fn main() -> corpusprep::Result<()> {
    let base = "Ljubljana je glavno mesto Slovenije in leži ob reki Ljubljanici med Alpami in Krasom.";
    let edited = "Ljubljana je glavno mesto Slovenije in leži ob reki Ljubljanici med Alpami in Krasom!";
    let other = "Piran je obmorsko mesto z beneško arhitekturo in dolgo solinarsko tradicijo.";

    let a = minhash(&shingle(base, 5)?, 0)?;
    let b = minhash(&shingle(edited, 5)?, 0)?;
    println!("estimated jaccard: {:.3}", estimate_jaccard(&a, &b)?);

    let docs = vec![
        Document::new("1", base).with_meta("source", "wiki"),
        Document::new("2", edited).with_meta("source", "wiki"),
        Document::new("3", edited).with_meta("source", "news"),
        Document::new("4", other),
    ];
    let cfg = DedupConfig {
        group_by: Some("source".into()),
        ..DedupConfig::default()
    };
    let (kept, report) = dedup_corpus(docs, &cfg)?;
    println!("kept: {:?}", kept.iter().map(|d| d.id.as_str()).collect::<Vec<_>>());
    println!("per group: {:?}", report.per_group_kept);
    Ok(())
}
