//! Fixed-length training example construction.
//!
//! Documents are tokenized; those longer than the per-example capacity are
//! split into units (sentences, paragraphs or sections) and consecutive units
//! are merged greedily into subdocuments. Subdocuments are then packed with
//! first-fit decreasing into examples of exactly `context_length` tokens:
//!
//! ```text
//! BOS m1 EOS m2 EOS ... mk EOS EOS EOS ... EOS
//! ```
//!
//! Every example starts with BOS, BOS appears nowhere else, each member is
//! followed by one EOS separator and the tail is padded with EOS. The
//! capacity of a single member is therefore `context_length - 2`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::document::{split_units, Document, UnitKind};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, Tokenizer};

pub const MIN_CONTEXT_LENGTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackConfig {
    pub context_length: usize,
    pub strategy: UnitKind,
}

impl PackConfig {
    pub fn new(context_length: usize, strategy: UnitKind) -> Result<Self> {
        let cfg = PackConfig {
            context_length,
            strategy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_length < MIN_CONTEXT_LENGTH {
            return Err(Error::Config(format!(
                "context length {} is below the minimum of {MIN_CONTEXT_LENGTH}",
                self.context_length
            )));
        }
        Ok(())
    }

    /// Largest member length: one slot goes to BOS, one to the member's EOS.
    pub fn capacity(&self) -> usize {
        self.context_length - 2
    }
}

/// Where a packed member came from. `tokens` is a half-open range into the
/// document's token stream; `units` is the half-open range of units it
/// covers, absent when the document was not split.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<[usize; 2]>,
    pub tokens: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subdocument {
    pub token_ids: Vec<TokenId>,
    pub source: SourceSpan,
}

impl Subdocument {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedExample {
    pub token_ids: Vec<TokenId>,
    /// BOS, members and their separators; everything after is padding.
    pub content_len: usize,
    pub members: Vec<SourceSpan>,
}

/// A document's token stream plus the token offsets at which its units
/// start (empty when the document fits without splitting).
#[derive(Debug, Clone)]
pub struct DocumentTokens {
    pub tokens: Vec<TokenId>,
    pub unit_offsets: Vec<usize>,
}

/// Tokenize a document the way [`make_subdocuments`] sees it. A document that
/// fits the capacity is encoded whole; a longer one is encoded unit by unit
/// (units carry their joiners, so nothing is lost).
pub fn tokenize_document(doc: &Document, cfg: &PackConfig, tok: &dyn Tokenizer) -> DocumentTokens {
    let whole = tok.encode(&doc.text);
    if whole.len() <= cfg.capacity() {
        return DocumentTokens {
            tokens: whole,
            unit_offsets: Vec::new(),
        };
    }
    let mut tokens = Vec::with_capacity(whole.len());
    let mut unit_offsets = Vec::new();
    for unit in split_units(doc, cfg.strategy) {
        unit_offsets.push(tokens.len());
        tokens.extend(tok.encode(&unit.full_text()));
    }
    DocumentTokens {
        tokens,
        unit_offsets,
    }
}

/// Split one document into subdocuments no longer than the capacity.
pub fn make_subdocuments(
    doc: &Document,
    cfg: &PackConfig,
    tok: &dyn Tokenizer,
) -> Result<Vec<Subdocument>> {
    cfg.validate()?;
    let dt = tokenize_document(doc, cfg, tok);
    if dt.tokens.is_empty() {
        return Ok(Vec::new());
    }
    let span = |units: Option<[usize; 2]>, start: usize, end: usize| Subdocument {
        token_ids: dt.tokens[start..end].to_vec(),
        source: SourceSpan {
            doc_id: doc.id.clone(),
            units,
            tokens: [start, end],
        },
    };
    if dt.unit_offsets.is_empty() {
        return Ok(vec![span(None, 0, dt.tokens.len())]);
    }

    let cap = cfg.capacity();
    let mut out = Vec::new();
    // Current run: (first unit, token start, token end).
    let mut run: Option<(usize, usize, usize)> = None;
    let n_units = dt.unit_offsets.len();
    for u in 0..n_units {
        let start = dt.unit_offsets[u];
        let end = dt.unit_offsets.get(u + 1).copied().unwrap_or(dt.tokens.len());
        let len = end - start;
        if len > cap {
            if let Some((fu, s, e)) = run.take() {
                out.push(span(Some([fu, u]), s, e));
            }
            let mut s = start;
            while end - s > cap {
                out.push(span(Some([u, u + 1]), s, s + cap));
                s += cap;
            }
            if s < end {
                run = Some((u, s, end));
            }
            continue;
        }
        match run {
            Some((fu, s, e)) if e - s + len <= cap => run = Some((fu, s, end)),
            Some((fu, s, e)) => {
                out.push(span(Some([fu, u]), s, e));
                run = Some((u, start, end));
            }
            None => run = Some((u, start, end)),
        }
    }
    if let Some((fu, s, e)) = run {
        out.push(span(Some([fu, n_units]), s, e));
    }
    Ok(out)
}

/// Max segment tree over open examples' remaining space, for first-fit
/// queries in O(log n).
struct FirstFit {
    size: usize,
    tree: Vec<usize>,
    len: usize,
}

impl FirstFit {
    fn new() -> Self {
        FirstFit {
            size: 1,
            tree: vec![0; 2],
            len: 0,
        }
    }

    fn push(&mut self, space: usize) -> usize {
        if self.len == self.size {
            let leaves: Vec<usize> = self.tree[self.size..].to_vec();
            self.size *= 2;
            self.tree = vec![0; 2 * self.size];
            self.tree[self.size..self.size + leaves.len()].copy_from_slice(&leaves);
            for i in (1..self.size).rev() {
                self.tree[i] = self.tree[2 * i].max(self.tree[2 * i + 1]);
            }
        }
        let idx = self.len;
        self.len += 1;
        self.set(idx, space);
        idx
    }

    fn set(&mut self, idx: usize, space: usize) {
        let mut i = idx + self.size;
        self.tree[i] = space;
        while i > 1 {
            i /= 2;
            self.tree[i] = self.tree[2 * i].max(self.tree[2 * i + 1]);
        }
    }

    fn get(&self, idx: usize) -> usize {
        self.tree[idx + self.size]
    }

    /// Lowest index with space >= need.
    fn first_fit(&self, need: usize) -> Option<usize> {
        if self.tree[1] < need {
            return None;
        }
        let mut i = 1;
        while i < self.size {
            i = if self.tree[2 * i] >= need { 2 * i } else { 2 * i + 1 };
        }
        Some(i - self.size)
    }
}

/// First-fit-decreasing packing into exact-length examples. Subdocuments are
/// taken longest first (ties by source span), each placed into the earliest
/// example with room for it and its EOS separator.
pub fn pack(subdocs: &[Subdocument], cfg: &PackConfig, tok: &dyn Tokenizer) -> Result<Vec<PackedExample>> {
    cfg.validate()?;
    let cap = cfg.capacity();
    if let Some(sd) = subdocs.iter().find(|s| s.len() > cap) {
        return Err(Error::Contract(format!(
            "subdocument of {} with {} tokens exceeds capacity {cap}",
            sd.source.doc_id,
            sd.len()
        )));
    }
    let mut order: Vec<usize> = (0..subdocs.len()).collect();
    order.sort_by(|&a, &b| {
        subdocs[b]
            .len()
            .cmp(&subdocs[a].len())
            .then_with(|| subdocs[a].source.cmp(&subdocs[b].source))
    });

    let mut bins = FirstFit::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let need = subdocs[i].len() + 1;
        let b = match bins.first_fit(need) {
            Some(b) => b,
            None => {
                members.push(Vec::new());
                bins.push(cfg.context_length - 1)
            }
        };
        bins.set(b, bins.get(b) - need);
        members[b].push(i);
    }

    let (bos, eos) = (tok.bos_id(), tok.eos_id());
    Ok(members
        .into_iter()
        .map(|ids| {
            let mut token_ids = Vec::with_capacity(cfg.context_length);
            token_ids.push(bos);
            for &i in &ids {
                token_ids.extend_from_slice(&subdocs[i].token_ids);
                token_ids.push(eos);
            }
            let content_len = token_ids.len();
            token_ids.resize(cfg.context_length, eos);
            PackedExample {
                token_ids,
                content_len,
                members: ids.iter().map(|&i| subdocs[i].source.clone()).collect(),
            }
        })
        .collect())
}

/// Subdocument every document, then pack the lot.
pub fn pack_documents<'a, I>(docs: I, cfg: &PackConfig, tok: &dyn Tokenizer) -> Result<Vec<PackedExample>>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut subdocs = Vec::new();
    for doc in docs {
        subdocs.extend(make_subdocuments(doc, cfg, tok)?);
    }
    pack(&subdocs, cfg, tok)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Example index, when the violation belongs to one example.
    pub example: Option<usize>,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PackReport {
    pub examples: usize,
    pub documents: usize,
    pub members: usize,
    pub total_tokens: usize,
    pub content_tokens: usize,
    pub padding_tokens: usize,
    pub violations: Vec<Violation>,
}

impl PackReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every example invariant and exact token conservation against the
/// source documents. Violations are collected, never raised.
pub fn verify_pack(
    examples: &[PackedExample],
    docs: &[Document],
    cfg: &PackConfig,
    tok: &dyn Tokenizer,
) -> PackReport {
    let (bos, eos) = (tok.bos_id(), tok.eos_id());
    let cap = cfg.capacity();
    let mut report = PackReport {
        examples: examples.len(),
        documents: docs.len(),
        ..PackReport::default()
    };
    let mut violations = Vec::new();
    let mut flag = |example: Option<usize>, kind: &str, detail: String| {
        violations.push(Violation {
            example,
            kind: kind.to_owned(),
            detail,
        })
    };

    let doc_tokens: HashMap<&str, DocumentTokens> = docs
        .iter()
        .map(|d| (d.id.as_str(), tokenize_document(d, cfg, tok)))
        .collect();
    let mut fragments: BTreeMap<&str, Vec<[usize; 2]>> = BTreeMap::new();

    for (ei, ex) in examples.iter().enumerate() {
        let e = Some(ei);
        report.total_tokens += ex.token_ids.len();
        if ex.token_ids.len() != cfg.context_length {
            flag(
                e,
                "length",
                format!("{} tokens, expected {}", ex.token_ids.len(), cfg.context_length),
            );
        }
        if ex.token_ids.first() != Some(&bos) {
            flag(e, "missing BOS", "first token is not BOS".into());
        }
        if let Some(p) = ex.token_ids.iter().skip(1).position(|&t| t == bos) {
            flag(e, "stray BOS", format!("BOS at position {}", p + 1));
        }
        let expected_content = 1 + ex
            .members
            .iter()
            .map(|m| m.tokens[1].saturating_sub(m.tokens[0]) + 1)
            .sum::<usize>();
        if ex.content_len != expected_content {
            flag(
                e,
                "content length",
                format!("content_len {} but members need {expected_content}", ex.content_len),
            );
        }
        if ex.token_ids.len() >= ex.content_len {
            if let Some(p) = ex.token_ids[ex.content_len..].iter().position(|&t| t != eos) {
                flag(e, "padding", format!("non-EOS at position {}", ex.content_len + p));
            }
        }
        report.content_tokens += ex.content_len.min(ex.token_ids.len());
        report.padding_tokens += ex.token_ids.len().saturating_sub(ex.content_len);

        let mut pos = 1;
        for m in &ex.members {
            report.members += 1;
            let [s, t] = m.tokens;
            let len = t.saturating_sub(s);
            if len > cap {
                flag(e, "capacity", format!("member of {} has {len} tokens", m.doc_id));
            }
            let Some(slice) = ex.token_ids.get(pos..pos + len) else {
                flag(e, "length", format!("member of {} overruns example", m.doc_id));
                break;
            };
            match doc_tokens.get(m.doc_id.as_str()) {
                None => flag(e, "unknown document", m.doc_id.clone()),
                Some(dt) => {
                    if dt.tokens.get(s..t) != Some(slice) {
                        flag(
                            e,
                            "content mismatch",
                            format!("{} tokens {s}..{t} differ from source", m.doc_id),
                        );
                    }
                    fragments.entry(m.doc_id.as_str()).or_default().push([s, t]);
                }
            }
            pos += len;
            if ex.token_ids.get(pos) != Some(&eos) {
                flag(e, "separator", format!("no EOS after member of {}", m.doc_id));
            }
            pos += 1;
        }
    }

    for doc in docs {
        let dt = &doc_tokens[doc.id.as_str()];
        let mut frags = fragments.remove(doc.id.as_str()).unwrap_or_default();
        frags.sort_unstable();
        let mut at = 0;
        for [s, t] in &frags {
            if *s != at {
                flag(
                    None,
                    "conservation",
                    format!("{}: tokens {at}..{s} missing or duplicated", doc.id),
                );
            } else if at != 0 && !is_declared_boundary(dt, at, cap) {
                flag(None, "boundary", format!("{}: split at token {at}", doc.id));
            }
            at = (*t).max(at);
        }
        if at != dt.tokens.len() {
            flag(
                None,
                "conservation",
                format!("{}: covered {at} of {} tokens", doc.id, dt.tokens.len()),
            );
        }
    }
    report.violations = violations;
    report
}

/// A document may be cut at a unit boundary, or inside an oversized unit at a
/// multiple of the capacity from the unit's start.
fn is_declared_boundary(dt: &DocumentTokens, at: usize, cap: usize) -> bool {
    if dt.unit_offsets.binary_search(&at).is_ok() {
        return true;
    }
    let u = dt.unit_offsets.partition_point(|&o| o <= at);
    if u == 0 {
        return false;
    }
    let start = dt.unit_offsets[u - 1];
    let end = dt.unit_offsets.get(u).copied().unwrap_or(dt.tokens.len());
    end - start > cap && (at - start).is_multiple_of(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::ByteTokenizer;

    fn cfg(ctx: usize) -> PackConfig {
        PackConfig::new(ctx, UnitKind::Paragraph).unwrap()
    }

    fn sub(id: &str, len: usize) -> Subdocument {
        Subdocument {
            token_ids: vec![100; len],
            source: SourceSpan {
                doc_id: id.into(),
                units: None,
                tokens: [0, len],
            },
        }
    }

    #[test]
    fn rejects_tiny_context() {
        assert!(PackConfig::new(7, UnitKind::Paragraph).is_err());
        assert_eq!(cfg(12).capacity(), 10);
    }

    #[test]
    fn short_document_is_one_subdocument() {
        let d = Document::new("d", "abcde");
        let s = make_subdocuments(&d, &cfg(12), &ByteTokenizer).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 5);
        assert_eq!(s[0].source.units, None);
    }

    #[test]
    fn greedy_unit_merge() {
        // Paragraph units including their joiners: 4+2, 1+2, 4 tokens.
        let d = Document::new("d", "aaaa\n\nb\n\ncccc");
        let s = make_subdocuments(&d, &cfg(12), &ByteTokenizer).unwrap();
        let lens: Vec<_> = s.iter().map(Subdocument::len).collect();
        assert_eq!(lens, vec![9, 4]);
        assert_eq!(s[0].source.units, Some([0, 2]));
        assert_eq!(s[1].source.units, Some([2, 3]));
    }

    #[test]
    fn oversized_unit_hard_split() {
        let d = Document::new("d", "x".repeat(25));
        let s = make_subdocuments(&d, &cfg(12), &ByteTokenizer).unwrap();
        let lens: Vec<_> = s.iter().map(Subdocument::len).collect();
        assert_eq!(lens, vec![10, 10, 5]);
    }

    #[test]
    fn empty_document_yields_nothing() {
        let d = Document::new("d", "");
        assert!(make_subdocuments(&d, &cfg(12), &ByteTokenizer).unwrap().is_empty());
    }

    #[test]
    fn two_members_fill_exactly() {
        let ex = pack(&[sub("a", 5), sub("b", 4)], &cfg(12), &ByteTokenizer).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].token_ids.len(), 12);
        assert_eq!(ex[0].content_len, 12);
        assert_eq!(ex[0].token_ids[0], 1);
        assert_eq!(ex[0].token_ids[6], 2);
        assert_eq!(ex[0].token_ids[11], 2);
    }

    #[test]
    fn single_member_is_padded() {
        let ex = pack(&[sub("a", 5)], &cfg(12), &ByteTokenizer).unwrap();
        assert_eq!(ex[0].content_len, 7);
        assert!(ex[0].token_ids[6..].iter().all(|&t| t == 2));
        assert_eq!(ex[0].token_ids.len(), 12);
    }

    #[test]
    fn empty_input_packs_to_nothing() {
        assert!(pack(&[], &cfg(12), &ByteTokenizer).unwrap().is_empty());
    }

    #[test]
    fn ffd_order_and_first_fit() {
        // Capacity 10 per member, 11 slots per example incl. separators.
        let subs = [sub("a", 3), sub("b", 7), sub("c", 2), sub("d", 6)];
        let ex = pack(&subs, &cfg(12), &ByteTokenizer).unwrap();
        let ids: Vec<Vec<&str>> = ex
            .iter()
            .map(|e| e.members.iter().map(|m| m.doc_id.as_str()).collect())
            .collect();
        // 7 -> ex0 (space 3), 6 -> ex1 (space 4), 3 -> ex1 (space 0), 2 -> ex0.
        assert_eq!(ids, vec![vec!["b", "c"], vec!["d", "a"]]);
    }

    #[test]
    fn pack_rejects_oversized() {
        assert!(pack(&[sub("a", 11)], &cfg(12), &ByteTokenizer).is_err());
    }

    #[test]
    fn verify_clean_and_faulty() {
        let docs = vec![
            Document::new("a", "hello world"),
            Document::new("b", "x".repeat(40)),
            Document::new("c", "one\n\ntwo\n\nthree"),
        ];
        let c = cfg(16);
        let ex = pack_documents(&docs, &c, &ByteTokenizer).unwrap();
        let r = verify_pack(&ex, &docs, &c, &ByteTokenizer);
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.total_tokens, ex.len() * 16);

        let mut bad = ex.clone();
        bad[0].token_ids[0] = 2;
        let r = verify_pack(&bad, &docs, &c, &ByteTokenizer);
        assert!(r.violations.iter().any(|v| v.kind == "missing BOS"));

        let mut short = ex.clone();
        short[0].token_ids.pop();
        let r = verify_pack(&short, &docs, &c, &ByteTokenizer);
        assert!(r.violations.iter().any(|v| v.kind == "length"));

        let mut dropped = ex.clone();
        dropped.pop();
        let r = verify_pack(&dropped, &docs, &c, &ByteTokenizer);
        assert!(r.violations.iter().any(|v| v.kind == "conservation"));
    }

    #[test]
    fn verify_flags_undeclared_split() {
        let docs = vec![Document::new("a", "abcdef")];
        let c = cfg(12);
        let t = ByteTokenizer;
        let halves = [
            Subdocument {
                token_ids: t.encode("abc"),
                source: SourceSpan { doc_id: "a".into(), units: None, tokens: [0, 3] },
            },
            Subdocument {
                token_ids: t.encode("def"),
                source: SourceSpan { doc_id: "a".into(), units: None, tokens: [3, 6] },
            },
        ];
        let ex = pack(&halves, &c, &t).unwrap();
        let r = verify_pack(&ex, &docs, &c, &t);
        assert!(r.violations.iter().any(|v| v.kind == "boundary"), "{:?}", r.violations);
    }

    #[test]
    fn first_fit_tree_grows() {
        let mut ff = FirstFit::new();
        for space in [3, 1, 5, 2, 8] {
            ff.push(space);
        }
        assert_eq!(ff.first_fit(4), Some(2));
        assert_eq!(ff.first_fit(6), Some(4));
        assert_eq!(ff.first_fit(9), None);
        ff.set(2, 0);
        assert_eq!(ff.first_fit(4), Some(4));
        assert_eq!(ff.first_fit(1), Some(0));
    }
}
