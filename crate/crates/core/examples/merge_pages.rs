//! Stitch OCR pages into one document and print the merge log.

use corpusprep::pagemerge::{merge_pages, HeuristicProvider, Page};

fn main() -> corpusprep::Result<()> {
    let pages = vec![
        Page::new(0, "Zbornik prispevkov\n\nLjubljana 2024"),
        Page::new(1, "Jezikovni viri so temelj za razvoj modelov, ki bodo služili razi-\n\n2"),
        Page::new(2, "skovalcem in javnosti pri vsakdanjem delu z besedili."),
    ];
    let out = merge_pages("zbornik", &pages, &HeuristicProvider)?;
    println!("boilerplate pages: {:?}", out.boilerplate_pages);
    for entry in &out.log {
        println!("{} -> {}: {:?}", entry.from_page, entry.to_page, entry.action);
    }
    println!("{}", out.document.text);
    Ok(())
}
