//! Check machine translations for truncation, length and markdown damage.

use corpusprep::evalmetrics::{eval_translations, markdown_match, render_report, EvalConfig, TranslationPair};

fn main() -> corpusprep::Result<()> {
    let pairs = vec![
        TranslationPair::new("ok", "# Title\n\nSome **bold** text.", "# Naslov\n\nNekaj **krepkega** besedila."),
        TranslationPair::new("cut", "A complete sentence that the model stopped translating.", "Popoln stavek"),
        TranslationPair::new("fmt", "- one\n- two\n- three", "- ena\n- dva"),
    ];
    let verdict = markdown_match(&pairs[2].original, &pairs[2].translated);
    println!("list verdict: {:?}", verdict.verdict);
    for m in &verdict.mismatches {
        println!("  at {}: expected {:?}, found {:?}", m.position, m.expected, m.found);
    }
    let report = eval_translations(&pairs, &EvalConfig::default())?;
    print!("{}", render_report(&report));
    Ok(())
}
