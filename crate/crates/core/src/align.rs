//! Parallel corpus construction at three alignment levels: interleaved
//! paragraphs, concatenated documents, and separate documents linked by a
//! pair id.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::document::Document;
use crate::error::{Error, Result};
use crate::text::Paragraphs;

pub const JOINER: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub pair_id: String,
    pub src: Document,
    pub tgt: Document,
}

impl ParallelPair {
    pub fn new(pair_id: impl Into<String>, src: Document, tgt: Document) -> Result<Self> {
        let pair = ParallelPair {
            pair_id: pair_id.into(),
            src,
            tgt,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pair_id.is_empty() {
            return Err(Error::Validation("pair_id is empty".into()));
        }
        if self.src.lang == self.tgt.lang {
            return Err(Error::Validation(format!(
                "pair {}: source and target share language {:?}",
                self.pair_id, self.src.lang
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    Paragraph,
    Document,
    Separate,
}

impl FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paragraph" => Ok(AlignMode::Paragraph),
            "document" => Ok(AlignMode::Document),
            "separate" => Ok(AlignMode::Separate),
            other => Err(Error::Config(format!("unknown alignment mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    SrcFirst,
    TgtFirst,
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "src_first" | "src-first" => Ok(Order::SrcFirst),
            "tgt_first" | "tgt-first" => Ok(Order::TgtFirst),
            other => Err(Error::Config(format!("unknown order {other:?}"))),
        }
    }
}

fn combined(pair: &ParallelPair, text: String, mode: &str) -> Document {
    Document::new(pair.pair_id.clone(), text)
        .with_meta("mode", mode)
        .with_meta("pair_id", pair.pair_id.clone())
        .with_meta("src_id", pair.src.id.clone())
        .with_meta("tgt_id", pair.tgt.id.clone())
        .with_meta("src_lang", pair.src.lang.clone())
        .with_meta("tgt_lang", pair.tgt.lang.clone())
}

/// Alternate source and target paragraphs: `s1, t1, s2, t2, ...`, joined by
/// blank lines. Both sides must have the same number of paragraphs.
pub fn interleave_paragraphs(pair: &ParallelPair) -> Result<Document> {
    let src = Paragraphs::split(&pair.src.text).parts;
    let tgt = Paragraphs::split(&pair.tgt.text).parts;
    if src.len() != tgt.len() {
        return Err(Error::Alignment {
            src: src.len(),
            tgt: tgt.len(),
        });
    }
    let text = src
        .iter()
        .zip(&tgt)
        .flat_map(|(s, t)| [*s, *t])
        .collect::<Vec<_>>()
        .join(JOINER);
    Ok(combined(pair, text, "paragraph"))
}

/// Both full texts in one document, separated by a blank line. An empty side
/// is recorded in `meta.empty_side`.
pub fn concat_documents(pair: &ParallelPair, order: Order) -> Document {
    let (first, second) = match order {
        Order::SrcFirst => (&pair.src.text, &pair.tgt.text),
        Order::TgtFirst => (&pair.tgt.text, &pair.src.text),
    };
    let mut doc = combined(pair, format!("{first}{JOINER}{second}"), "document");
    doc.meta.insert(
        "order".into(),
        match order {
            Order::SrcFirst => "src_first",
            Order::TgtFirst => "tgt_first",
        }
        .into(),
    );
    for (side, text) in [("src", &pair.src.text), ("tgt", &pair.tgt.text)] {
        if text.is_empty() {
            doc.meta.insert("empty_side".into(), side.into());
        }
    }
    doc
}

/// The two documents unchanged, each tagged with `meta.pair_id`.
pub fn emit_separate(pair: &ParallelPair) -> (Document, Document) {
    let tag = |d: &Document| d.clone().with_meta("pair_id", pair.pair_id.clone());
    (tag(&pair.src), tag(&pair.tgt))
}

/// Join two document collections on `meta.pair_id` (falling back to the
/// document id). Unmatched documents on either side are returned as errors
/// in the second element.
pub fn join_on_pair_id(src: Vec<Document>, tgt: Vec<Document>) -> (Vec<ParallelPair>, Vec<String>) {
    fn key(d: &Document) -> String {
        d.meta.get("pair_id").cloned().unwrap_or_else(|| d.id.clone())
    }
    let mut by_key: std::collections::BTreeMap<String, Document> =
        tgt.into_iter().map(|d| (key(&d), d)).collect();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for s in src {
        let k = key(&s);
        match by_key.remove(&k) {
            Some(t) => pairs.push(ParallelPair {
                pair_id: k,
                src: s,
                tgt: t,
            }),
            None => unmatched.push(format!("source {} has no target", s.id)),
        }
    }
    unmatched.extend(by_key.values().map(|t| format!("target {} has no source", t.id)));
    (pairs, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(src: &str, tgt: &str) -> ParallelPair {
        ParallelPair::new(
            "p7",
            Document::new("en1", src).with_lang("en"),
            Document::new("sl1", tgt).with_lang("sl"),
        )
        .unwrap()
    }

    #[test]
    fn interleave() {
        let d = interleave_paragraphs(&pair("A\n\nB", "X\n\nY")).unwrap();
        assert_eq!(d.text, "A\n\nX\n\nB\n\nY");
        assert_eq!(d.meta["mode"], "paragraph");
        assert_eq!(d.meta["src_id"], "en1");
        assert_eq!(d.meta["tgt_id"], "sl1");
        assert_eq!(interleave_paragraphs(&pair("A", "X")).unwrap().text, "A\n\nX");
    }

    #[test]
    fn interleave_count_mismatch() {
        let err = interleave_paragraphs(&pair("A\n\nB", "X\n\nY\n\nZ")).unwrap_err();
        assert!(matches!(err, Error::Alignment { src: 2, tgt: 3 }), "{err}");
    }

    #[test]
    fn concat_orders() {
        let p = pair("Hello", "Pozdrav");
        assert_eq!(concat_documents(&p, Order::SrcFirst).text, "Hello\n\nPozdrav");
        assert_eq!(concat_documents(&p, Order::TgtFirst).text, "Pozdrav\n\nHello");
        assert_eq!(concat_documents(&p, Order::SrcFirst).meta["mode"], "document");
    }

    #[test]
    fn concat_empty_target_flagged() {
        let d = concat_documents(&pair("Hello", ""), Order::SrcFirst);
        assert_eq!(d.text, "Hello\n\n");
        assert_eq!(d.meta["empty_side"], "tgt");
    }

    #[test]
    fn separate_tags_pair_id_and_rejoins() {
        let p = pair("Hello", "Pozdrav");
        let (s, t) = emit_separate(&p);
        assert_eq!(s.id, "en1");
        assert_eq!(t.id, "sl1");
        assert_eq!(s.meta["pair_id"], "p7");
        assert_eq!(t.meta["pair_id"], "p7");
        let (pairs, unmatched) = join_on_pair_id(vec![s], vec![t]);
        assert!(unmatched.is_empty());
        assert_eq!(pairs[0].pair_id, "p7");
        assert_eq!(pairs[0].src.text, p.src.text);
        assert_eq!(pairs[0].tgt.text, p.tgt.text);
    }

    #[test]
    fn pair_validation() {
        let same = ParallelPair::new("p", Document::new("a", "x").with_lang("sl"), Document::new("b", "y").with_lang("sl"));
        assert!(same.is_err());
        let empty = ParallelPair::new("", Document::new("a", "x").with_lang("en"), Document::new("b", "y").with_lang("sl"));
        assert!(empty.is_err());
    }

    #[test]
    fn join_reports_unmatched() {
        let (pairs, unmatched) = join_on_pair_id(
            vec![Document::new("a", "x"), Document::new("b", "y")],
            vec![Document::new("a", "u"), Document::new("c", "w")],
        );
        assert_eq!(pairs.len(), 1);
        assert_eq!(unmatched.len(), 2);
    }
}
