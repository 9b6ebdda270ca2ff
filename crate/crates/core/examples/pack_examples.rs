//! Pack documents into fixed-length training examples and verify them.

use corpusprep::packer::{pack_documents, verify_pack, PackConfig};
use corpusprep::{ByteTokenizer, Document, UnitKind};

fn main() -> corpusprep::Result<()> {
    let docs = vec![
        Document::new("short", "Kratko besedilo."),
        Document::new("long", "Prvi odstavek je nekoliko daljši.\n\nDrugi odstavek.\n\nTretji odstavek zaključi."),
        Document::new("mid", "Srednje dolgo besedilo za polnjenje."),
    ];
    let cfg = PackConfig::new(48, UnitKind::Paragraph)?;
    let tok = ByteTokenizer;
    let examples = pack_documents(&docs, &cfg, &tok)?;
    for (i, ex) in examples.iter().enumerate() {
        let members: Vec<&str> = ex.members.iter().map(|m| m.doc_id.as_str()).collect();
        println!("example {i}: {} content tokens, members {members:?}", ex.content_len);
    }
    let report = verify_pack(&examples, &docs, &cfg, &tok);
    println!("clean: {}", report.is_clean());
    Ok(())
}
