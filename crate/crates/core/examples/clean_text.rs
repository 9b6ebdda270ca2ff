//! Run the default cleaning profile over a few noisy documents.

use corpusprep::filters::FilterPipeline;
use corpusprep::Document;

fn main() {
    let docs = [
        Document::new("scan", "PoroÄ\u{8d}ilo o delu\n\n\n\n![slika](fig1.png)\n\nRezultati so dobri."),
        Document::new("caron", "Z\u{30c}elimo vam lep dan."),
    ];
    let pipeline = FilterPipeline::default_profile(true);
    for doc in &docs {
        let (clean, report) = pipeline.apply(doc);
        println!("{}: {:?}", clean.id, clean.text);
        println!("  changed by: {:?}", report.per_filter.iter().filter(|(_, n)| **n > 0).map(|(k, _)| k).collect::<Vec<_>>());
    }
}
