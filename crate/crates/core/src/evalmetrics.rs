//! Translation quality checks: truncation and length-ratio heuristics, a
//! deterministic markdown-structure judge, and report aggregation.
//!
//! The judge reduces both texts to a [`MarkdownOutline`] (the ordered
//! structural skeleton with all prose removed) and requires the two outlines
//! to be identical. Bold, italic, strikethrough and inline code are counted
//! per block rather than position-matched, since translation reorders words.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::char_len;

pub const TRUNCATION_RATIO: f64 = 0.7;
pub const LENGTH_RATIO_LO: f64 = 0.73;
pub const LENGTH_RATIO_HI: f64 = 1.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub id: String,
    pub original: String,
    pub translated: String,
    #[serde(default)]
    pub dataset: String,
    /// Scores computed elsewhere (e.g. a neural semantic metric), by name.
    #[serde(default)]
    pub external_scores: BTreeMap<String, f64>,
}

impl TranslationPair {
    pub fn new(id: impl Into<String>, original: impl Into<String>, translated: impl Into<String>) -> Self {
        TranslationPair {
            id: id.into(),
            original: original.into(),
            translated: translated.into(),
            dataset: String::new(),
            external_scores: BTreeMap::new(),
        }
    }

    /// Translated over original length, in Unicode scalar values.
    pub fn char_ratio(&self) -> Result<f64> {
        let orig = char_len(&self.original);
        if orig == 0 {
            return Err(Error::Validation(format!(
                "pair {}: original is empty, length ratio undefined",
                self.id
            )));
        }
        Ok(char_len(&self.translated) as f64 / orig as f64)
    }
}

/// True when the translation is shorter than 0.7 of the original.
pub fn truncation_flag(pair: &TranslationPair) -> Result<bool> {
    Ok(pair.char_ratio()? < TRUNCATION_RATIO)
}

/// True when `lo <= ratio <= hi`.
pub fn length_ratio_keep(pair: &TranslationPair, lo: f64, hi: f64) -> Result<bool> {
    let r = pair.char_ratio()?;
    Ok(lo <= r && r <= hi)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Heading { level: u8 },
    CodeFence { language: String },
    List { ordered: bool, nesting: usize, item_count: usize },
    Blockquote { depth: usize },
    Link { url: String },
    Image { url: String },
    Table { rows: usize, cols: usize, has_header: bool },
    Math { display: bool },
    HtmlTag { name: String },
    HorizontalRule,
    ParagraphBreak,
    /// Inline emphasis and code counts for the preceding block.
    Spans { bold: usize, italic: usize, strike: usize, code: usize },
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Heading { level } => write!(f, "heading({level})"),
            Element::CodeFence { language } if language.is_empty() => write!(f, "code_fence"),
            Element::CodeFence { language } => write!(f, "code_fence({language})"),
            Element::List { ordered, nesting, item_count } => write!(
                f,
                "list({}, nesting {nesting}, {item_count} items)",
                if *ordered { "ordered" } else { "unordered" }
            ),
            Element::Blockquote { depth } => write!(f, "blockquote({depth})"),
            Element::Link { url } => write!(f, "link({url})"),
            Element::Image { url } => write!(f, "image({url})"),
            Element::Table { rows, cols, has_header } => write!(
                f,
                "table({rows}x{cols}{})",
                if *has_header { ", header" } else { "" }
            ),
            Element::Math { display: true } => write!(f, "math(display)"),
            Element::Math { display: false } => write!(f, "math(inline)"),
            Element::HtmlTag { name } => write!(f, "html<{name}>"),
            Element::HorizontalRule => write!(f, "horizontal_rule"),
            Element::ParagraphBreak => write!(f, "paragraph_break"),
            Element::Spans { bold, italic, strike, code } => write!(
                f,
                "spans(bold {bold}, italic {italic}, strike {strike}, code {code})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MarkdownOutline {
    pub elements: Vec<Element>,
}

impl MarkdownOutline {
    /// True when nothing but paragraphs is present.
    pub fn is_plain(&self) -> bool {
        self.elements.iter().all(|e| *e == Element::ParagraphBreak)
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).unwrap())
}

fn atx_heading(line: &str) -> Option<(u8, &str)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let caps = re(&RE, r"^ {0,3}(#{1,6})(?:[ \t]+(.*?))?[ \t#]*$").captures(line)?;
    let level = caps[1].len() as u8;
    Some((level, caps.get(2).map_or("", |m| m.as_str())))
}

fn is_hr(line: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"^ {0,3}(?:(?:-[ \t]*){3,}|(?:\*[ \t]*){3,}|(?:_[ \t]*){3,})$").is_match(line)
}

fn setext_level(line: &str) -> Option<u8> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let caps = re(&RE, r"^ {0,3}(=+|-+)[ \t]*$").captures(line)?;
    Some(if caps[1].starts_with('=') { 1 } else { 2 })
}

fn fence_open(line: &str) -> Option<(char, usize, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let caps = re(&RE, r"^ {0,3}(`{3,}|~{3,})[ \t]*([^`\s]*)").captures(line)?;
    let fence = &caps[1];
    Some((
        fence.chars().next().unwrap(),
        fence.len(),
        caps[2].to_lowercase(),
    ))
}

fn list_item(line: &str) -> Option<(usize, bool, &str)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let caps = re(&RE, r"^([ \t]*)([-*+]|\d{1,9}[.)])(?:[ \t]+(.*)|$)").captures(line)?;
    let indent = caps[1].chars().map(|c| if c == '\t' { 4 } else { 1 }).sum();
    let ordered = caps[2].chars().next().is_some_and(|c| c.is_ascii_digit());
    Some((indent, ordered, caps.get(3).map_or("", |m| m.as_str())))
}

fn is_table_delimiter(line: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"^[ \t]*\|?[ \t]*:?-+:?[ \t]*(?:\|[ \t]*:?-+:?[ \t]*)*\|?[ \t]*$").is_match(line)
        && line.contains('-')
}

fn table_cells(line: &str) -> usize {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').count()
}

fn blockquote_strip(line: &str) -> Option<&str> {
    let t = line.trim_start();
    if line.len() - t.len() > 3 {
        return None;
    }
    let rest = t.strip_prefix('>')?;
    Some(rest.strip_prefix(' ').unwrap_or(rest))
}

fn starts_block(line: &str, next: Option<&str>) -> bool {
    atx_heading(line).is_some()
        || fence_open(line).is_some()
        || is_hr(line)
        || blockquote_strip(line).is_some()
        || list_item(line).is_some()
        || line.trim_start().starts_with("$$")
        || (line.contains('|') && next.is_some_and(is_table_delimiter))
}

/// Extract the structural outline of a markdown text.
pub fn markdown_outline(text: &str) -> MarkdownOutline {
    let lines: Vec<&str> = text.lines().collect();
    let mut elements = Vec::new();
    outline_lines(&lines, &mut elements);
    MarkdownOutline { elements }
}

fn outline_lines(lines: &[&str], out: &mut Vec<Element>) {
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.trim().is_empty() {
            i += 1;
            continue;
        }

        if let Some((ch, len, language)) = fence_open(line) {
            i += 1;
            while i < lines.len() {
                let t = lines[i].trim();
                i += 1;
                if t.len() >= len && t.chars().all(|c| c == ch) {
                    break;
                }
            }
            out.push(Element::CodeFence { language });
            continue;
        }

        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("$$") {
            if rest.trim_end().ends_with("$$") && !rest.trim().is_empty() {
                i += 1;
            } else {
                i += 1;
                while i < lines.len() {
                    let closes = lines[i].contains("$$");
                    i += 1;
                    if closes {
                        break;
                    }
                }
            }
            out.push(Element::Math { display: true });
            continue;
        }
        if trimmed == "\\[" {
            i += 1;
            while i < lines.len() {
                let closes = lines[i].trim() == "\\]";
                i += 1;
                if closes {
                    break;
                }
            }
            out.push(Element::Math { display: true });
            continue;
        }

        if let Some((level, content)) = atx_heading(line) {
            out.push(Element::Heading { level });
            inline_elements(content, out);
            i += 1;
            continue;
        }

        if is_hr(line) {
            out.push(Element::HorizontalRule);
            i += 1;
            continue;
        }

        if line.contains('|') && lines.get(i + 1).is_some_and(|l| is_table_delimiter(l)) {
            let cols = table_cells(line);
            let mut body = vec![line];
            i += 2;
            while i < lines.len() && lines[i].contains('|') && !lines[i].trim().is_empty() {
                body.push(lines[i]);
                i += 1;
            }
            out.push(Element::Table {
                rows: body.len(),
                cols,
                has_header: true,
            });
            inline_elements(&body.join("\n"), out);
            continue;
        }
        if trimmed.starts_with('|') {
            let cols = table_cells(line);
            let mut body = Vec::new();
            while i < lines.len() && lines[i].trim_start().starts_with('|') {
                body.push(lines[i]);
                i += 1;
            }
            out.push(Element::Table {
                rows: body.len(),
                cols,
                has_header: false,
            });
            inline_elements(&body.join("\n"), out);
            continue;
        }

        if blockquote_strip(line).is_some() {
            let mut inner = Vec::new();
            while i < lines.len() {
                match blockquote_strip(lines[i]) {
                    Some(rest) => inner.push(rest),
                    None => break,
                }
                i += 1;
            }
            let depth = 1 + inner
                .iter()
                .map(|l| {
                    let mut d = 0;
                    let mut s = *l;
                    while let Some(r) = blockquote_strip(s) {
                        d += 1;
                        s = r;
                    }
                    d
                })
                .max()
                .unwrap_or(0);
            out.push(Element::Blockquote { depth });
            outline_lines(&inner, out);
            continue;
        }

        if let Some((indent, ordered, first)) = list_item(line) {
            let mut indents = vec![indent];
            let mut nesting = 1;
            let mut items = 1;
            let mut content = vec![first];
            i += 1;
            while i < lines.len() {
                let l = lines[i];
                if l.trim().is_empty() {
                    // A blank line continues the list only if more list follows.
                    let next = lines[i + 1..].iter().find(|l| !l.trim().is_empty());
                    let continues = next.is_some_and(|n| {
                        list_item(n).is_some() || n.starts_with("  ") || n.starts_with('\t')
                    });
                    if !continues {
                        break;
                    }
                    i += 1;
                    continue;
                }
                if let Some((ind, o, text)) = list_item(l) {
                    if ind <= indents[0] && o != ordered {
                        break;
                    }
                    while indents.last().is_some_and(|&top| ind < top) && indents.len() > 1 {
                        indents.pop();
                    }
                    if indents.last().is_some_and(|&top| ind > top) {
                        indents.push(ind);
                    }
                    nesting = nesting.max(indents.len());
                    items += 1;
                    content.push(text);
                } else if l.starts_with("  ") || l.starts_with('\t') {
                    content.push(l.trim());
                } else if starts_block(l, lines.get(i + 1).copied()) {
                    break;
                } else {
                    // Lazy continuation of the previous item.
                    content.push(l.trim());
                }
                i += 1;
            }
            out.push(Element::List {
                ordered,
                nesting,
                item_count: items,
            });
            inline_elements(&content.join("\n"), out);
            continue;
        }

        // Paragraph, possibly a setext heading.
        let mut para = vec![line];
        i += 1;
        let mut setext = None;
        while i < lines.len() {
            let l = lines[i];
            if l.trim().is_empty() {
                break;
            }
            if let Some(level) = setext_level(l) {
                setext = Some(level);
                i += 1;
                break;
            }
            if starts_block(l, lines.get(i + 1).copied()) {
                break;
            }
            para.push(l);
            i += 1;
        }
        match setext {
            Some(level) => out.push(Element::Heading { level }),
            None => out.push(Element::ParagraphBreak),
        }
        inline_elements(&para.join("\n"), out);
    }
}

/// Pull links, images, inline math, HTML tags and span counts out of one
/// block's inline text.
fn inline_elements(text: &str, out: &mut Vec<Element>) {
    static STRUCT_RE: OnceLock<Regex> = OnceLock::new();
    let struct_re = re(
        &STRUCT_RE,
        r#"(?x)
        (?P<img>!\[[^\]\n]*\]\((?P<img_url>[^)\s]*)(?:\s+"[^"]*")?\))
      | (?P<link>\[(?P<link_text>[^\]\n]*)\]\((?P<link_url>[^)\s]*)(?:\s+"[^"]*")?\))
      | (?P<auto><(?P<auto_url>(?:https?|ftp|mailto):[^>\s]+)>)
      | (?P<html></?(?P<tag>[A-Za-z][A-Za-z0-9-]*)(?:\s[^<>]*)?/?>)
    "#,
    );

    let mut spans = SpanCounts::default();
    let mut rest = String::new();
    for piece in split_code_and_math(text) {
        match piece {
            Inline::Code => spans.code += 1,
            Inline::Math(display) => out.push(Element::Math { display }),
            Inline::Text(t) => {
                let mut last = 0;
                for caps in struct_re.captures_iter(t) {
                    let m = caps.get(0).unwrap();
                    rest.push_str(&t[last..m.start()]);
                    last = m.end();
                    if let Some(u) = caps.name("img_url") {
                        out.push(Element::Image { url: u.as_str().to_owned() });
                    } else if let Some(u) = caps.name("link_url") {
                        out.push(Element::Link { url: u.as_str().to_owned() });
                        rest.push_str(&caps["link_text"]);
                    } else if let Some(u) = caps.name("auto_url") {
                        out.push(Element::Link { url: u.as_str().to_owned() });
                    } else if let Some(tag) = caps.name("tag") {
                        let closing = m.as_str().starts_with("</");
                        let name = tag.as_str().to_lowercase();
                        out.push(Element::HtmlTag {
                            name: if closing { format!("/{name}") } else { name },
                        });
                    }
                }
                rest.push_str(&t[last..]);
                rest.push(' ');
            }
        }
    }
    spans.count_emphasis(&rest);
    if !spans.is_zero() {
        out.push(Element::Spans {
            bold: spans.bold,
            italic: spans.italic,
            strike: spans.strike,
            code: spans.code,
        });
    }
}

#[derive(Debug, Default)]
struct SpanCounts {
    bold: usize,
    italic: usize,
    strike: usize,
    code: usize,
}

impl SpanCounts {
    fn is_zero(&self) -> bool {
        self.bold + self.italic + self.strike + self.code == 0
    }

    fn count_emphasis(&mut self, text: &str) {
        static STRIKE: OnceLock<Regex> = OnceLock::new();
        static BOLD: OnceLock<Regex> = OnceLock::new();
        static ITALIC_STAR: OnceLock<Regex> = OnceLock::new();
        static ITALIC_UNDER: OnceLock<Regex> = OnceLock::new();
        let strike = re(&STRIKE, r"~~[^~\s](?:[^~]*?[^~\s])?~~");
        let bold = re(&BOLD, r"\*\*[^*\s](?:[^*]*?[^*\s])?\*\*|__[^_\s](?:[^_]*?[^_\s])?__");
        let italic_star = re(&ITALIC_STAR, r"\*[^*\s](?:[^*]*?[^*\s])?\*");
        let italic_under = re(&ITALIC_UNDER, r"(?:^|[^\w])_[^_\s](?:[^_]*?[^_\s])?_(?:[^\w]|$)");

        self.strike += strike.find_iter(text).count();
        let t = strike.replace_all(text, " ");
        self.bold += bold.find_iter(&t).count();
        let t = bold.replace_all(&t, " ");
        self.italic += italic_star.find_iter(&t).count();
        let t = italic_star.replace_all(&t, " ");
        self.italic += italic_under.find_iter(&t).count();
    }
}

enum Inline<'a> {
    Text(&'a str),
    Code,
    Math(bool),
}

/// Split inline text into code spans, math spans and plain text.
fn split_code_and_math(text: &str) -> Vec<Inline<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let found: Option<(Inline, usize)> = if b == b'`' {
            let run = bytes[i..].iter().take_while(|&&c| c == b'`').count();
            let fence = &text[i..i + run];
            text[i + run..]
                .find(fence)
                .map(|off| (Inline::Code, i + run + off + run))
        } else if b == b'\\' && i + 1 < bytes.len() && (bytes[i + 1] == b'(' || bytes[i + 1] == b'[') {
            let close = if bytes[i + 1] == b'(' { "\\)" } else { "\\]" };
            text[i + 2..]
                .find(close)
                .map(|off| (Inline::Math(bytes[i + 1] == b'['), i + 2 + off + 2))
        } else if b == b'\\' {
            // Escaped character: skip it.
            i += 2;
            continue;
        } else if b == b'$' && bytes.get(i + 1) == Some(&b'$') {
            text[i + 2..].find("$$").map(|off| (Inline::Math(true), i + 2 + off + 2))
        } else if b == b'$' {
            inline_dollar_end(text, i).map(|end| (Inline::Math(false), end))
        } else {
            None
        };
        match found {
            Some((piece, end)) => {
                if start < i {
                    out.push(Inline::Text(&text[start..i]));
                }
                out.push(piece);
                i = end;
                start = end;
            }
            None => i += 1,
        }
    }
    if start < text.len() {
        out.push(Inline::Text(&text[start..]));
    }
    out
}

/// `$x$` math: the opening `$` is followed by a non-space, the closing one
/// preceded by a non-space and not followed by a digit (so "$5 and $6" is
/// not math).
fn inline_dollar_end(text: &str, open: usize) -> Option<usize> {
    let after = text[open + 1..].chars().next()?;
    if after.is_whitespace() || after == '$' {
        return None;
    }
    let body_start = open + 1;
    let mut search = body_start + after.len_utf8();
    while let Some(off) = text[search..].find('$') {
        let close = search + off;
        let before = text[..close].chars().next_back()?;
        let next = text[close + 1..].chars().next();
        if before == '\n' && text[body_start..close].contains("\n\n") {
            return None;
        }
        if !before.is_whitespace() && !next.is_some_and(|c| c.is_ascii_digit()) {
            return Some(close + 1);
        }
        search = close + 1;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVerdict {
    pub verdict: Verdict,
    pub mismatches: Vec<Mismatch>,
}

impl FormatVerdict {
    pub fn is_good(&self) -> bool {
        self.verdict == Verdict::Good
    }
}

const NONE: &str = "<none>";

/// Compare the outlines of an original and its translation element by
/// element. Good only if every element matches.
pub fn markdown_match(original: &str, translated: &str) -> FormatVerdict {
    let a = markdown_outline(original).elements;
    let b = markdown_outline(translated).elements;
    let mismatches: Vec<Mismatch> = (0..a.len().max(b.len()))
        .filter_map(|i| {
            let (x, y) = (a.get(i), b.get(i));
            (x != y).then(|| Mismatch {
                position: i,
                expected: x.map_or_else(|| NONE.to_owned(), ToString::to_string),
                found: y.map_or_else(|| NONE.to_owned(), ToString::to_string),
            })
        })
        .collect();
    FormatVerdict {
        verdict: if mismatches.is_empty() { Verdict::Good } else { Verdict::Bad },
        mismatches,
    }
}

/// Decides which language a text is written in.
pub trait LanguageDetector: Send + Sync {
    /// Two-letter code, or `None` when undecidable.
    fn detect(&self, text: &str) -> Option<String>;
}

/// A naive Slovene/English detector that counts stopwords. It exists to
/// exercise the language-error plumbing and is not accurate enough for real
/// evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopwordDetector;

const SL_STOPWORDS: &[&str] = &[
    "in", "je", "da", "se", "na", "za", "so", "ki", "ne", "pa", "to", "z", "v", "s", "ali",
    "tudi", "kot", "bi", "sem", "smo", "ste", "pri", "od", "do", "iz", "po", "ter", "če", "že",
];
const EN_STOPWORDS: &[&str] = &[
    "the", "and", "is", "of", "to", "a", "in", "that", "it", "for", "on", "with", "as", "was",
    "are", "be", "this", "by", "or", "from", "at", "an", "not", "have", "has", "but", "which",
];

impl LanguageDetector for StopwordDetector {
    fn detect(&self, text: &str) -> Option<String> {
        let mut sl = 0usize;
        let mut en = 0usize;
        for w in text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
            let w = w.to_lowercase();
            sl += usize::from(SL_STOPWORDS.contains(&w.as_str()));
            en += usize::from(EN_STOPWORDS.contains(&w.as_str()));
        }
        match sl.cmp(&en) {
            std::cmp::Ordering::Greater => Some("sl".into()),
            std::cmp::Ordering::Less => Some("en".into()),
            std::cmp::Ordering::Equal => None,
        }
    }
}

pub struct EvalConfig<'a> {
    pub truncation: bool,
    pub markdown: bool,
    pub language: bool,
    pub detector: Option<&'a dyn LanguageDetector>,
    pub target_lang: String,
}

impl Default for EvalConfig<'_> {
    fn default() -> Self {
        EvalConfig {
            truncation: true,
            markdown: true,
            language: false,
            detector: None,
            target_lang: "sl".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub pairs: usize,
    /// Mean of each external score over pairs carrying it.
    pub score_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFlags {
    pub id: String,
    pub truncated: bool,
    pub bad_format: bool,
    pub wrong_language: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub truncation_errors: Option<usize>,
    pub format_errors: Option<usize>,
    pub language_errors: Option<usize>,
    /// Percentages of `total`.
    pub truncation_rate: Option<f64>,
    pub format_rate: Option<f64>,
    pub language_rate: Option<f64>,
    pub datasets: BTreeMap<String, DatasetSummary>,
    /// Mean over datasets of each dataset's mean score.
    pub overall_scores: BTreeMap<String, f64>,
    /// Pairs with at least one error.
    pub flagged: Vec<PairFlags>,
}

fn percent(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregate the enabled checks over a set of translation pairs.
pub fn eval_translations<'p, I>(pairs: I, cfg: &EvalConfig<'_>) -> Result<EvalReport>
where
    I: IntoIterator<Item = &'p TranslationPair>,
{
    if cfg.language && cfg.detector.is_none() {
        return Err(Error::Config(
            "language error rate requested but no language detector configured".into(),
        ));
    }
    let mut report = EvalReport::default();
    let (mut trunc, mut fmt, mut lang) = (0, 0, 0);
    let mut scores: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut counts: HashMap<String, usize> = HashMap::new();

    for pair in pairs {
        report.total += 1;
        *counts.entry(pair.dataset.clone()).or_default() += 1;
        let ds = scores.entry(pair.dataset.clone()).or_default();
        for (name, &v) in &pair.external_scores {
            ds.entry(name.clone()).or_default().push(v);
        }
        let truncated = cfg.truncation && truncation_flag(pair)?;
        let bad_format = cfg.markdown && !markdown_match(&pair.original, &pair.translated).is_good();
        let wrong_language = cfg.language
            && cfg
                .detector
                .and_then(|d| d.detect(&pair.translated))
                .as_deref()
                != Some(cfg.target_lang.as_str());
        trunc += usize::from(truncated);
        fmt += usize::from(bad_format);
        lang += usize::from(wrong_language);
        if truncated || bad_format || wrong_language {
            report.flagged.push(PairFlags {
                id: pair.id.clone(),
                truncated,
                bad_format,
                wrong_language,
            });
        }
    }
    report.flagged.sort_by(|a, b| a.id.cmp(&b.id));

    let total = report.total;
    if cfg.truncation {
        report.truncation_errors = Some(trunc);
        report.truncation_rate = Some(percent(trunc, total));
    }
    if cfg.markdown {
        report.format_errors = Some(fmt);
        report.format_rate = Some(percent(fmt, total));
    }
    if cfg.language {
        report.language_errors = Some(lang);
        report.language_rate = Some(percent(lang, total));
    }

    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (dataset, metrics) in scores {
        let mut summary = DatasetSummary {
            pairs: counts[&dataset],
            score_means: BTreeMap::new(),
        };
        for (name, mut values) in metrics {
            let mean = stable_mean(&mut values);
            summary.score_means.insert(name.clone(), mean);
            per_metric.entry(name).or_default().push(mean);
        }
        report.datasets.insert(dataset, summary);
    }
    for (name, mut means) in per_metric {
        report.overall_scores.insert(name, stable_mean(&mut means));
    }
    Ok(report)
}

/// Render an evaluation report as one table row per dataset plus an overall
/// row, with the error-rate columns.
pub fn render_report(report: &EvalReport) -> String {
    use std::fmt::Write;
    let metrics: Vec<&String> = report.overall_scores.keys().collect();
    let mut s = String::new();
    let _ = write!(s, "{:<20}", "Dataset");
    for m in &metrics {
        let _ = write!(s, " {:>12}", m);
    }
    let _ = writeln!(s, " {:>8} {:>12} {:>12} {:>14}", "Pairs", "Lang. err.", "Trunc. err.", "Markdown err.");
    let fmt_rate = |r: Option<f64>| r.map_or_else(|| "—".to_owned(), |v| format!("{v:.2}%"));
    let _ = write!(s, "{:<20}", "Overall");
    for m in &metrics {
        let _ = write!(s, " {:>12.6}", report.overall_scores[*m]);
    }
    let _ = writeln!(
        s,
        " {:>8} {:>12} {:>12} {:>14}",
        report.total,
        fmt_rate(report.language_rate),
        fmt_rate(report.truncation_rate),
        fmt_rate(report.format_rate)
    );
    for (name, ds) in &report.datasets {
        let label = if name.is_empty() { "(unnamed)" } else { name };
        let _ = write!(s, "{label:<20}");
        for m in &metrics {
            match ds.score_means.get(*m) {
                Some(v) => {
                    let _ = write!(s, " {v:>12.6}");
                }
                None => {
                    let _ = write!(s, " {:>12}", "—");
                }
            }
        }
        let _ = writeln!(s, " {:>8}", ds.pairs);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Element> {
        markdown_outline(text).elements
    }

    #[test]
    fn truncation_boundaries() {
        let orig = "a".repeat(1000);
        let p = |n: usize| TranslationPair::new("x", orig.clone(), "b".repeat(n));
        assert!(truncation_flag(&p(650)).unwrap());
        assert!(truncation_flag(&p(690)).unwrap());
        assert!(!truncation_flag(&p(700)).unwrap());
        assert!(!truncation_flag(&p(1000)).unwrap());
        assert!(truncation_flag(&TranslationPair::new("x", "", "y")).is_err());
    }

    #[test]
    fn truncation_counts_scalars_not_bytes() {
        // 10 chars of č (20 bytes) against 10 ASCII chars: ratio 1.
        let p = TranslationPair::new("x", "abcdefghij", "č".repeat(10));
        assert_eq!(p.char_ratio().unwrap(), 1.0);
        let p = TranslationPair::new("x", "č".repeat(10), "abcdef");
        assert!(truncation_flag(&p).unwrap());
    }

    #[test]
    fn length_ratio_interval() {
        let orig = "a".repeat(100);
        let p = |n: usize| TranslationPair::new("x", orig.clone(), "b".repeat(n));
        assert!(length_ratio_keep(&p(73), LENGTH_RATIO_LO, LENGTH_RATIO_HI).unwrap());
        assert!(length_ratio_keep(&p(135), LENGTH_RATIO_LO, LENGTH_RATIO_HI).unwrap());
        assert!(length_ratio_keep(&p(100), LENGTH_RATIO_LO, LENGTH_RATIO_HI).unwrap());
        assert!(!length_ratio_keep(&p(136), LENGTH_RATIO_LO, LENGTH_RATIO_HI).unwrap());
        assert!(!length_ratio_keep(&p(72), LENGTH_RATIO_LO, LENGTH_RATIO_HI).unwrap());
    }

    #[test]
    fn outline_examples() {
        assert_eq!(kinds("# T\n\npara"), vec![Element::Heading { level: 1 }, Element::ParagraphBreak]);
        assert_eq!(kinds("T\n===\n"), vec![Element::Heading { level: 1 }]);
        assert_eq!(kinds("T\n---\n"), vec![Element::Heading { level: 2 }]);
        assert_eq!(kinds("plain text only"), vec![Element::ParagraphBreak]);
        assert!(markdown_outline("plain text only").is_plain());
    }

    #[test]
    fn outline_blocks() {
        let md = "```python\nx = 1\n# not heading\n```\n\n- a\n- b\n  - c\n\n1. one\n2. two\n\n> quote\n> > deeper\n\n---\n\n| a | b |\n|---|---|\n| 1 | 2 |\n| 3 | 4 |\n\n$$\nx^2\n$$\n";
        assert_eq!(
            kinds(md),
            vec![
                Element::CodeFence { language: "python".into() },
                Element::List { ordered: false, nesting: 2, item_count: 3 },
                Element::List { ordered: true, nesting: 1, item_count: 2 },
                Element::Blockquote { depth: 2 },
                Element::ParagraphBreak,
                Element::Blockquote { depth: 1 },
                Element::ParagraphBreak,
                Element::HorizontalRule,
                Element::Table { rows: 3, cols: 2, has_header: true },
                Element::Math { display: true },
            ]
        );
    }

    #[test]
    fn outline_inline() {
        let md = "See [docs](http://x) and ![img](a.png), **bold** *it* ~~no~~ `code` $x$ <b>hi</b> <https://y>.";
        assert_eq!(
            kinds(md),
            vec![
                Element::ParagraphBreak,
                Element::Link { url: "http://x".into() },
                Element::Image { url: "a.png".into() },
                Element::Math { display: false },
                Element::HtmlTag { name: "b".into() },
                Element::HtmlTag { name: "/b".into() },
                Element::Link { url: "https://y".into() },
                Element::Spans { bold: 1, italic: 1, strike: 1, code: 1 },
            ]
        );
    }

    #[test]
    fn dollar_amounts_are_not_math() {
        assert_eq!(kinds("It costs $5 and $6 today."), vec![Element::ParagraphBreak]);
        assert_eq!(kinds("snake_case_name stays plain"), vec![Element::ParagraphBreak]);
    }

    #[test]
    fn match_examples() {
        assert!(!markdown_match("# Naslov", "Naslov").is_good());
        assert!(markdown_match("# Title\n\nSome words here.", "# Naslov\n\nNekaj besed tukaj.").is_good());
        let v = markdown_match("[a](http://x)", "[b](http://y)");
        assert!(!v.is_good());
        assert_eq!(v.mismatches.len(), 1);
        assert_eq!(v.mismatches[0].expected, "link(http://x)");
        assert_eq!(v.mismatches[0].found, "link(http://y)");
        assert!(markdown_match("Words  with\nspacing.", "Besede s\n  presledki.").is_good());
    }

    #[test]
    fn eval_aggregates() {
        let orig = "a".repeat(100);
        let mut pairs: Vec<TranslationPair> = (0..100)
            .map(|i| TranslationPair::new(format!("p{i:03}"), orig.clone(), "b".repeat(100)))
            .collect();
        pairs[3].translated = "b".repeat(10);
        pairs[50].translated = "b".repeat(60);
        pairs[0].external_scores.insert("comet".into(), 0.7);
        pairs[1].external_scores.insert("comet".into(), 0.8);
        let r = eval_translations(&pairs, &EvalConfig::default()).unwrap();
        assert_eq!(r.truncation_errors, Some(2));
        assert!((r.truncation_rate.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.format_rate, Some(0.0));
        assert!((r.datasets[""].score_means["comet"] - 0.75).abs() < 1e-12);
        assert_eq!(r.flagged.len(), 2);
        assert!(render_report(&r).contains("2.00%"));
    }

    #[test]
    fn language_requires_detector() {
        let cfg = EvalConfig {
            language: true,
            ..EvalConfig::default()
        };
        let pairs = [TranslationPair::new("a", "x", "y")];
        assert!(matches!(eval_translations(&pairs, &cfg), Err(Error::Config(_))));
        let det = StopwordDetector;
        let cfg = EvalConfig {
            language: true,
            detector: Some(&det),
            ..EvalConfig::default()
        };
        let pairs = [
            TranslationPair::new("a", "The cat is on the mat.", "Mačka je na preprogi in spi."),
            TranslationPair::new("b", "The cat is on the mat.", "The cat is on the mat."),
        ];
        let r = eval_translations(&pairs, &cfg).unwrap();
        assert_eq!(r.language_errors, Some(1));
    }
}
