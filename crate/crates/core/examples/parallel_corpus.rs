//! Build paragraph-, document- and separate-level parallel examples.

use corpusprep::align::{concat_documents, emit_separate, interleave_paragraphs, Order, ParallelPair};
use corpusprep::Document;

fn main() -> corpusprep::Result<()> {
    let pair = ParallelPair::new(
        "p1",
        Document::new("en-1", "The river is cold.\n\nThe sun is warm.").with_lang("en"),
        Document::new("sl-1", "Reka je mrzla.\n\nSonce je toplo.").with_lang("sl"),
    )?;
    println!("paragraph:\n{}\n", interleave_paragraphs(&pair)?.text);
    println!("document:\n{}\n", concat_documents(&pair, Order::TgtFirst).text);
    let (src, tgt) = emit_separate(&pair);
    println!("separate: {} / {}", src.id, tgt.id);
    Ok(())
}
