//! Stitching OCR'd pages back into one document.
//!
//! Pages are first classified as content or boilerplate; boilerplate pages
//! are dropped. The remaining pages are folded left to right, and at every
//! page boundary a [`MergeProvider`] looks at the last paragraph of the text
//! so far and the first paragraph of the next page and picks one of five
//! actions:
//!
//! | action                | effect                                          |
//! |-----------------------|-------------------------------------------------|
//! | `drop_footer`         | remove the trailing paragraph, then decide again |
//! | `drop_header`         | remove the leading paragraph, then decide again  |
//! | `join_hyphenated`     | concatenate without the trailing `-`            |
//! | `join_same_paragraph` | concatenate with a space                        |
//! | `separate`            | join with a blank line                          |
//!
//! The built-in [`HeuristicProvider`] is deterministic. [`ReplayProvider`]
//! replays decisions computed elsewhere (for example by a language model)
//! from a line-record file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::document::Document;
use crate::error::{Error, Result};
use crate::text::Paragraphs;

/// Pages shorter than this (in characters, trimmed) are boilerplate.
pub const MIN_CONTENT_CHARS: usize = 25;
/// Pages whose alphanumeric share of non-whitespace characters is below
/// this are boilerplate.
pub const MIN_ALNUM_RATIO: f64 = 0.2;
/// A line seen on this many consecutive pages is a running header/footer.
pub const RUNNING_LINE_PAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageLabel {
    Content,
    Boilerplate,
    #[default]
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub label: PageLabel,
}

impl Page {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        Page {
            index,
            text: text.into(),
            label: PageLabel::Unlabeled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeAction {
    DropFooter,
    DropHeader,
    JoinHyphenated,
    JoinSameParagraph,
    Separate,
}

impl MergeAction {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeAction::DropFooter => "drop_footer",
            MergeAction::DropHeader => "drop_header",
            MergeAction::JoinHyphenated => "join_hyphenated",
            MergeAction::JoinSameParagraph => "join_same_paragraph",
            MergeAction::Separate => "separate",
        }
    }
}

impl fmt::Display for MergeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MergeAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            MergeAction::DropFooter,
            MergeAction::DropHeader,
            MergeAction::JoinHyphenated,
            MergeAction::JoinSameParagraph,
            MergeAction::Separate,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown merge action {s:?}")))
    }
}

/// What a provider sees when classifying a page.
pub struct PageContext<'a> {
    pub doc_id: &'a str,
    pub prev: Option<&'a Page>,
    pub next: Option<&'a Page>,
    /// Lines repeated on several consecutive pages of this document.
    pub running_lines: &'a HashSet<String>,
}

/// One page boundary. `boundary` counts boundaries between content pages
/// from 0; `step` counts decisions already taken at this boundary (a dropped
/// header or footer triggers another decision).
pub struct Boundary<'a> {
    pub doc_id: &'a str,
    pub boundary: usize,
    pub step: usize,
    pub last_par: &'a str,
    pub first_par: &'a str,
    pub running_lines: &'a HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Heuristic,
    Replay,
    /// Replay had no entry for this boundary; the heuristic decided.
    Fallback,
}

pub trait MergeProvider {
    fn classify(&self, page: &Page, ctx: &PageContext<'_>) -> PageLabel;
    fn decide(&self, boundary: &Boundary<'_>) -> Result<(MergeAction, DecisionSource)>;
}

fn page_number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?xi)^
            (?:
                [\s\-–—_.|()\[\]*\#]* \d{1,4} (?:\s*/\s*\d{1,4})? [\s\-–—_.|()\[\]*]*
              | (?:stran|str\.|page|p\.) \s* \d{1,4} (?:\s*(?:/|od|of)\s*\d{1,4})? \.?
              | [\s\-–—.]* (?-i:[IVXLCDM]+|[ivx]+) [\s\-–—.]*
            )$",
        )
        .unwrap()
    })
}

/// Page numbers with optional decoration (`12`, `— 14 —`, `- 3 -`, `7/120`),
/// `Stran N`, and roman numerals.
pub fn is_page_marker(par: &str) -> bool {
    let t = par.trim();
    !t.is_empty() && !t.contains('\n') && page_number_re().is_match(t)
}

fn is_header_or_footer(par: &str, running_lines: &HashSet<String>) -> bool {
    is_page_marker(par) || running_lines.contains(par.trim())
}

const SENTENCE_FINAL: &[char] = &['.', '!', '?', ':', '"', '”', '“', '»', '«', '…', '\''];

fn starts_lowercase(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_lowercase)
}

fn ends_hyphenated(s: &str) -> bool {
    let mut rev = s.chars().rev();
    rev.next() == Some('-') && rev.next().is_some_and(char::is_alphabetic)
}

fn heuristic_decision(last_par: &str, first_par: &str, running_lines: &HashSet<String>) -> Result<MergeAction> {
    let last = last_par.trim();
    let first = first_par.trim();
    if last.is_empty() || first.is_empty() {
        return Err(Error::Contract(
            "merge decisions need two non-empty paragraphs".into(),
        ));
    }
    if is_header_or_footer(last, running_lines) {
        return Ok(MergeAction::DropFooter);
    }
    if is_header_or_footer(first, running_lines) {
        return Ok(MergeAction::DropHeader);
    }
    if ends_hyphenated(last) && starts_lowercase(first) {
        return Ok(MergeAction::JoinHyphenated);
    }
    if !last.ends_with(SENTENCE_FINAL) && starts_lowercase(first) {
        return Ok(MergeAction::JoinSameParagraph);
    }
    Ok(MergeAction::Separate)
}

/// The default decision rules, in priority order: footer, header, hyphenated
/// word, continued paragraph, separate paragraphs.
pub fn decide_merge(last_par: &str, first_par: &str) -> Result<MergeAction> {
    heuristic_decision(last_par, first_par, &HashSet::new())
}

/// Default page classification: boilerplate when the page (minus running
/// lines) is shorter than 25 characters, is mostly non-alphanumeric, or is
/// nothing but a page number.
pub fn classify_page(page: &Page, ctx: &PageContext<'_>) -> PageLabel {
    let body: String = page
        .text
        .lines()
        .filter(|l| !ctx.running_lines.contains(l.trim()))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim();
    if body.chars().count() < MIN_CONTENT_CHARS || is_page_marker(body) {
        return PageLabel::Boilerplate;
    }
    let visible = body.chars().filter(|c| !c.is_whitespace()).count();
    let alnum = body.chars().filter(|c| c.is_alphanumeric()).count();
    if (alnum as f64) < MIN_ALNUM_RATIO * visible as f64 {
        return PageLabel::Boilerplate;
    }
    PageLabel::Content
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicProvider;

impl MergeProvider for HeuristicProvider {
    fn classify(&self, page: &Page, ctx: &PageContext<'_>) -> PageLabel {
        classify_page(page, ctx)
    }

    fn decide(&self, b: &Boundary<'_>) -> Result<(MergeAction, DecisionSource)> {
        heuristic_decision(b.last_par, b.first_par, b.running_lines)
            .map(|a| (a, DecisionSource::Heuristic))
    }
}

/// One precomputed decision. Records with `action` are boundary decisions;
/// records with `page_index` and `label` are page labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub doc_id: String,
    #[serde(default)]
    pub boundary: Option<usize>,
    #[serde(default)]
    pub step: usize,
    #[serde(default)]
    pub action: Option<MergeAction>,
    #[serde(default)]
    pub page_index: Option<usize>,
    #[serde(default)]
    pub label: Option<PageLabel>,
}

/// Replays recorded decisions keyed by `(doc_id, boundary, step)` and page
/// labels keyed by `(doc_id, page_index)`; anything missing falls back to the
/// heuristic.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    decisions: HashMap<(String, usize, usize), MergeAction>,
    labels: HashMap<(String, usize), PageLabel>,
}

impl ReplayProvider {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Result<Self> {
        let mut p = ReplayProvider::default();
        for r in records {
            match (r.boundary, r.action, r.page_index, r.label) {
                (Some(b), Some(a), None, None) => {
                    p.decisions.insert((r.doc_id, b, r.step), a);
                }
                (None, None, Some(i), Some(l)) => {
                    p.labels.insert((r.doc_id, i), l);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "replay record for {} needs either boundary+action or page_index+label",
                        r.doc_id
                    )))
                }
            }
        }
        Ok(p)
    }
}

impl MergeProvider for ReplayProvider {
    fn classify(&self, page: &Page, ctx: &PageContext<'_>) -> PageLabel {
        self.labels
            .get(&(ctx.doc_id.to_owned(), page.index))
            .copied()
            .unwrap_or_else(|| classify_page(page, ctx))
    }

    fn decide(&self, b: &Boundary<'_>) -> Result<(MergeAction, DecisionSource)> {
        match self.decisions.get(&(b.doc_id.to_owned(), b.boundary, b.step)) {
            Some(&a) => Ok((a, DecisionSource::Replay)),
            None => heuristic_decision(b.last_par, b.first_par, b.running_lines)
                .map(|a| (a, DecisionSource::Fallback)),
        }
    }
}

/// Exact trimmed lines occurring on at least [`RUNNING_LINE_PAGES`]
/// consecutive pages.
pub fn running_lines(pages: &[Page]) -> HashSet<String> {
    let mut streak: HashMap<&str, usize> = HashMap::new();
    let mut found = HashSet::new();
    for page in pages {
        let lines: HashSet<&str> = page
            .text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        streak.retain(|l, _| lines.contains(l));
        for l in lines {
            let n = streak.entry(l).or_default();
            *n += 1;
            if *n >= RUNNING_LINE_PAGES {
                found.insert(l.to_owned());
            }
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeLogEntry {
    pub boundary: usize,
    pub step: usize,
    pub from_page: usize,
    pub to_page: usize,
    pub action: MergeAction,
    pub source: DecisionSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub document: Document,
    pub log: Vec<MergeLogEntry>,
    pub boilerplate_pages: Vec<usize>,
    /// No content page survived classification.
    pub empty: bool,
}

fn split_last_paragraph(text: &str) -> (&str, &str) {
    let paras = Paragraphs::split(text);
    let last = *paras.parts.last().expect("split yields at least one part");
    let prefix_with_sep = &text[..text.len() - last.len()];
    let sep_len = paras.separators.last().map_or(0, |s| s.len());
    (&prefix_with_sep[..prefix_with_sep.len() - sep_len], last)
}

fn split_first_paragraph(text: &str) -> (&str, &str) {
    let paras = Paragraphs::split(text);
    let first = paras.parts[0];
    let sep_len = paras.separators.first().map_or(0, |s| s.len());
    (first, &text[first.len() + sep_len..])
}

/// Classify, drop boilerplate and fold the content pages into one document
/// with id `doc_id`. Page indices must be strictly increasing.
pub fn merge_pages(doc_id: &str, pages: &[Page], provider: &dyn MergeProvider) -> Result<MergeOutcome> {
    if let Some(w) = pages.windows(2).find(|w| w[0].index >= w[1].index) {
        return Err(Error::Validation(format!(
            "{doc_id}: page indices not strictly increasing ({} then {})",
            w[0].index, w[1].index
        )));
    }
    let running = running_lines(pages);
    let mut content: Vec<&Page> = Vec::new();
    let mut boilerplate_pages = Vec::new();
    for (i, page) in pages.iter().enumerate() {
        let label = match page.label {
            PageLabel::Unlabeled => provider.classify(
                page,
                &PageContext {
                    doc_id,
                    prev: i.checked_sub(1).map(|j| &pages[j]),
                    next: pages.get(i + 1),
                    running_lines: &running,
                },
            ),
            given => given,
        };
        match label {
            PageLabel::Boilerplate => boilerplate_pages.push(page.index),
            _ => content.push(page),
        }
    }

    let mut log = Vec::new();
    let Some((first, rest)) = content.split_first() else {
        return Ok(MergeOutcome {
            document: Document::new(doc_id, "").with_meta("pages", pages.len().to_string()),
            log,
            boilerplate_pages,
            empty: true,
        });
    };

    let mut acc = first.text.clone();
    let mut prev_index = first.index;
    for (b, page) in rest.iter().enumerate() {
        let mut next: &str = &page.text;
        let mut step = 0;
        loop {
            let a = acc.trim_end();
            let n = next.trim_start();
            if a.is_empty() {
                acc = n.to_owned();
                break;
            }
            if n.is_empty() {
                acc.truncate(a.len());
                break;
            }
            let (head, last_par) = split_last_paragraph(a);
            let (first_par, tail) = split_first_paragraph(n);
            let (action, source) = provider.decide(&Boundary {
                doc_id,
                boundary: b,
                step,
                last_par,
                first_par,
                running_lines: &running,
            })?;
            log.push(MergeLogEntry {
                boundary: b,
                step,
                from_page: prev_index,
                to_page: page.index,
                action,
                source,
            });
            step += 1;
            match action {
                MergeAction::DropFooter => {
                    acc = head.to_owned();
                    continue;
                }
                MergeAction::DropHeader => {
                    next = tail;
                    continue;
                }
                MergeAction::JoinHyphenated => {
                    let stem = a.strip_suffix('-').unwrap_or(a);
                    acc = format!("{stem}{n}");
                }
                MergeAction::JoinSameParagraph => acc = format!("{a} {n}"),
                MergeAction::Separate => acc = format!("{a}\n\n{n}"),
            }
            break;
        }
        prev_index = page.index;
    }

    Ok(MergeOutcome {
        document: Document::new(doc_id, acc).with_meta("pages", pages.len().to_string()),
        log,
        boilerplate_pages,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pages(texts: &[&str]) -> Vec<Page> {
        texts.iter().enumerate().map(|(i, t)| Page::new(i, *t)).collect()
    }

    fn ctx(running: &HashSet<String>) -> PageContext<'_> {
        PageContext {
            doc_id: "d",
            prev: None,
            next: None,
            running_lines: running,
        }
    }

    #[test]
    fn classification() {
        let none = HashSet::new();
        assert_eq!(classify_page(&Page::new(0, ""), &ctx(&none)), PageLabel::Boilerplate);
        assert_eq!(classify_page(&Page::new(0, "— 14 —"), &ctx(&none)), PageLabel::Boilerplate);
        let prose = "Beseda za besedo sestavlja stavek, ki pove nekaj o svetu. ".repeat(9);
        assert_eq!(classify_page(&Page::new(0, prose), &ctx(&none)), PageLabel::Content);
        let symbols = "| --- | --- | --- | --- | --- | --- | --- | --- | 1 |";
        assert_eq!(classify_page(&Page::new(0, symbols), &ctx(&none)), PageLabel::Boilerplate);
    }

    #[test]
    fn page_markers() {
        for m in ["12", "— 14 —", "- 3 -", "Stran 12", "str. 4", "xiv", "XII", "7 / 120", "[5]"] {
            assert!(is_page_marker(m), "{m}");
        }
        for m in ["Mi", "Novo poglavje", "12 jabolk", "vid", ""] {
            assert!(!is_page_marker(m), "{m}");
        }
    }

    #[test]
    fn decision_rules() {
        assert_eq!(decide_merge("…razisko-", "vanje je…").unwrap(), MergeAction::JoinHyphenated);
        assert_eq!(decide_merge("Stran 12", "Novo poglavje…").unwrap(), MergeAction::DropFooter);
        assert_eq!(decide_merge("Konec stavka.", "Nov odstavek…").unwrap(), MergeAction::Separate);
        assert_eq!(decide_merge("Konec stavka.", "14").unwrap(), MergeAction::DropHeader);
        assert_eq!(decide_merge("in potem je", "prišel domov.").unwrap(), MergeAction::JoinSameParagraph);
        assert_eq!(decide_merge("znak -", "nadaljuje").unwrap(), MergeAction::JoinSameParagraph);
        assert!(matches!(decide_merge("", "x"), Err(Error::Contract(_))));
    }

    #[test]
    fn hyphenated_pages_join() {
        let out = merge_pages("d", &pages(&["beseda je razisko-", "vanje besed."]), &HeuristicProvider).unwrap();
        // Both pages are shorter than the content threshold, so label them.
        assert!(out.empty);
        let mut ps = pages(&["beseda je razisko-", "vanje besed."]);
        for p in &mut ps {
            p.label = PageLabel::Content;
        }
        let out = merge_pages("d", &ps, &HeuristicProvider).unwrap();
        assert_eq!(out.document.text, "beseda je raziskovanje besed.");
        assert_eq!(out.log[0].action, MergeAction::JoinHyphenated);
    }

    #[test]
    fn boilerplate_page_removed() {
        let body = "Vsebina knjige se začne tukaj in traja dolgo.";
        let out = merge_pages("d", &pages(&["12", body]), &HeuristicProvider).unwrap();
        assert_eq!(out.document.text, body);
        assert_eq!(out.boilerplate_pages, vec![0]);
        assert!(out.log.is_empty());
    }

    #[test]
    fn separate_paragraphs_get_blank_line() {
        let a = "Prvi odstavek je dovolj dolg za vsebino.";
        let b = "Drugi odstavek je prav tako dovolj dolg.";
        let out = merge_pages("d", &pages(&[a, b]), &HeuristicProvider).unwrap();
        assert_eq!(out.document.text, format!("{a}\n\n{b}"));
    }

    #[test]
    fn footer_then_header_then_join() {
        let a = "Prvi del besedila, ki se nadaljuje na\n\n— 14 —";
        let b = "Stran 15\n\nnaslednji strani brez prekinitve.";
        let out = merge_pages("d", &pages(&[a, b]), &HeuristicProvider).unwrap();
        assert_eq!(
            out.document.text,
            "Prvi del besedila, ki se nadaljuje na naslednji strani brez prekinitve."
        );
        let actions: Vec<_> = out.log.iter().map(|e| e.action).collect();
        assert_eq!(
            actions,
            vec![MergeAction::DropFooter, MergeAction::DropHeader, MergeAction::JoinSameParagraph]
        );
        assert_eq!(out.log[2].step, 2);
    }

    #[test]
    fn running_titles_are_detected() {
        let body = |s: &str| format!("ZGODOVINA SLOVENCEV\n\n{s} je poglavje z dovolj besedila.");
        let ps = pages(&[&body("Prvo."), &body("Drugo."), &body("Tretje.")]);
        let running = running_lines(&ps);
        assert!(running.contains("ZGODOVINA SLOVENCEV"));
        let out = merge_pages("d", &ps, &HeuristicProvider).unwrap();
        assert_eq!(out.document.text.matches("ZGODOVINA").count(), 1);
    }

    #[test]
    fn single_page_is_verbatim() {
        let t = "  Ena sama stran z besedilom,\n\n\n ki ostane nespremenjena.\n";
        let out = merge_pages("d", &pages(&[t]), &HeuristicProvider).unwrap();
        assert_eq!(out.document.text, t);
    }

    #[test]
    fn indices_must_increase() {
        let ps = vec![Page::new(2, "a"), Page::new(1, "b")];
        assert!(merge_pages("d", &ps, &HeuristicProvider).is_err());
    }

    #[test]
    fn replay_overrides_and_falls_back() {
        let replay = ReplayProvider::from_records(vec![ReplayRecord {
            doc_id: "d".into(),
            boundary: Some(0),
            step: 0,
            action: Some(MergeAction::JoinSameParagraph),
            page_index: None,
            label: None,
        }])
        .unwrap();
        let a = "Prvi odstavek je dovolj dolg za vsebino.";
        let b = "Drugi odstavek je prav tako dovolj dolg.";
        let c = "Tretji odstavek je prav tako dovolj dolg.";
        let out = merge_pages("d", &pages(&[a, b, c]), &replay).unwrap();
        assert_eq!(out.document.text, format!("{a} {b}\n\n{c}"));
        assert_eq!(out.log[0].source, DecisionSource::Replay);
        assert_eq!(out.log[1].source, DecisionSource::Fallback);
    }
}
