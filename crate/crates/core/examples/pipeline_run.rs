//! Run filter, dedup and pack from a TOML config, then print corpus stats.

use std::fs;

use corpusprep::pipeline::{self, PipelineConfig};
use corpusprep::ByteTokenizer;

const CONFIG: &str = r#"
input = "corpus.jsonl"
output = "out"

[[stage]]
name = "filter"

[[stage]]
name = "dedup"

[[stage]]
name = "pack"
context_length = 64
"#;

fn main() -> corpusprep::Result<()> {
    let dir = std::env::temp_dir().join(format!("corpusprep-example-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let corpus = [
        r#"{"id":"1","text":"Prvi dokument.\n\n\n\nIma dva odstavka."}"#,
        r#"{"id":"2","text":"Prvi dokument.\n\nIma dva odstavka."}"#,
        r#"{"id":"3","text":"Drugačno besedilo o gorah."}"#,
    ];
    fs::write(dir.join("corpus.jsonl"), corpus.join("\n") + "\n")?;

    let cfg = PipelineConfig::from_toml(CONFIG, &dir)?;
    let mut named = vec![("raw".to_owned(), dir.join("corpus.jsonl"))];
    for s in pipeline::run(&cfg)? {
        println!("{}: {} -> {}", s.stage, s.records_in, s.records_out);
        named.push((s.stage.clone(), s.output.clone()));
    }
    print!("{}", pipeline::render_stats(&pipeline::stats(&named, &ByteTokenizer)?));
    fs::remove_dir_all(&dir)?;
    Ok(())
}
