//! The document record, its line-delimited serialization and unit splitting.
//!
//! One document is one line of JSON with the fields `id`, `text`, `lang` and
//! `meta`. `lang` and `meta` may be omitted and default to empty.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use regex::Regex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::text::Paragraphs;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub lang: String,
    /// Sorted so serialized output is byte-stable.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            lang: String::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("document id is empty".into()));
        }
        if !is_valid_lang(&self.lang) {
            return Err(Error::Validation(format!(
                "document {}: lang {:?} is not a two-letter lowercase code",
                self.id, self.lang
            )));
        }
        Ok(())
    }
}

pub fn is_valid_lang(lang: &str) -> bool {
    lang.is_empty() || (lang.len() == 2 && lang.bytes().all(|b| b.is_ascii_lowercase()))
}

/// Parse one line record into a validated [`Document`].
pub fn parse_record(line: &str) -> Result<Document> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| Error::parse("<record>", e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(Error::parse("<record>", "expected a JSON object"));
    };

    let id = take_string(&mut obj, "id", true)?.unwrap_or_default();
    let text = take_string(&mut obj, "text", true)?.unwrap_or_default();
    let lang = take_string(&mut obj, "lang", false)?.unwrap_or_default();
    let meta = match obj.remove("meta") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(map)) => map
            .into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k, s)),
                other => Err(Error::parse(
                    format!("meta.{k}"),
                    format!("expected a string, found {other}"),
                )),
            })
            .collect::<Result<_>>()?,
        Some(other) => {
            return Err(Error::parse(
                "meta",
                format!("expected an object of strings, found {other}"),
            ))
        }
    };

    let doc = Document {
        id,
        text,
        lang,
        meta,
    };
    doc.validate()?;
    Ok(doc)
}

fn take_string(
    obj: &mut serde_json::Map<String, Value>,
    field: &str,
    required: bool,
) -> Result<Option<String>> {
    match obj.remove(field) {
        Some(Value::String(s)) => Ok(Some(s)),
        None | Some(Value::Null) if !required => Ok(None),
        None => Err(Error::parse(field, "missing field")),
        Some(other) => Err(Error::parse(
            field,
            format!("expected a string, found {other}"),
        )),
    }
}

/// Serialize a document as one physical line (no trailing newline).
pub fn serialize_record(doc: &Document) -> Result<String> {
    doc.validate()?;
    to_json_line(doc)
}

pub(crate) fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let line = serde_json::to_string(value).map_err(|e| Error::Serialize(e.to_string()))?;
    debug_assert!(!line.contains('\n'));
    Ok(line)
}

/// Streaming reader over a line-record file. Blank lines are skipped.
pub struct RecordReader<R> {
    inner: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        RecordReader {
            inner,
            line_no: 0,
            buf: String::new(),
        }
    }

    /// Next non-blank line and its 1-based number.
    fn next_line(&mut self) -> Option<Result<(usize, String)>> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    let line = self.buf.trim_end_matches(['\n', '\r']);
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(Ok((self.line_no, line.to_owned())));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        let (n, line) = match self.next_line()? {
            Ok(x) => x,
            Err(e) => return Some(Err(e)),
        };
        Some(parse_record(&line).map_err(|e| e.at_line(n)))
    }
}

/// Read every JSON line of a file into `T`. Used for the auxiliary record
/// types (pages, votes, pairs, scores).
pub fn read_json_lines<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut rr = RecordReader::new(reader);
    let mut out = Vec::new();
    while let Some(item) = rr.next_line() {
        let (n, line) = item?;
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: Some(n),
            field: "<record>".into(),
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub struct RecordWriter<W> {
    inner: W,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(inner: W) -> Self {
        RecordWriter { inner }
    }

    pub fn write(&mut self, doc: &Document) -> Result<()> {
        let line = serialize_record(doc)?;
        writeln!(self.inner, "{line}")?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = to_json_line(value)?;
        writeln!(self.inner, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Sentence,
    Paragraph,
    Section,
}

impl std::str::FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(UnitKind::Sentence),
            "paragraph" => Ok(UnitKind::Paragraph),
            "section" => Ok(UnitKind::Section),
            other => Err(Error::Config(format!(
                "unknown split strategy {other:?} (expected sentence, paragraph or section)"
            ))),
        }
    }
}

/// A contiguous piece of a document. `joiner` is the exact text that followed
/// the unit in the source, so concatenating `text + joiner` over all units in
/// ordinal order reproduces the document verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub text: String,
    pub joiner: String,
    pub kind: UnitKind,
    pub source_id: String,
    pub ordinal: usize,
}

impl Unit {
    /// The unit including its trailing joiner.
    pub fn full_text(&self) -> String {
        let mut s = String::with_capacity(self.text.len() + self.joiner.len());
        s.push_str(&self.text);
        s.push_str(&self.joiner);
        s
    }
}

/// Split a document into units. Empty text yields no units.
///
/// - paragraph: split on blank lines
/// - section: split before each markdown heading line (outside code fences)
/// - sentence: split after `.`, `?` or `!` followed by whitespace and an
///   uppercase letter, except after a short list of common abbreviations and
///   single-letter initials
pub fn split_units(doc: &Document, strategy: UnitKind) -> Vec<Unit> {
    if doc.text.is_empty() {
        return Vec::new();
    }
    let pieces = match strategy {
        UnitKind::Paragraph => paragraph_pieces(&doc.text),
        UnitKind::Section => section_pieces(&doc.text),
        UnitKind::Sentence => sentence_pieces(&doc.text),
    };
    pieces
        .into_iter()
        .enumerate()
        .map(|(ordinal, (text, joiner))| Unit {
            text: text.to_owned(),
            joiner: joiner.to_owned(),
            kind: strategy,
            source_id: doc.id.clone(),
            ordinal,
        })
        .collect()
}

/// Fold pieces that carry no text into their neighbours so every unit has
/// content. Leading empties prepend to the first real unit; later empties
/// extend the previous unit's joiner.
fn compact(text: &str, cuts: Vec<(usize, usize, usize)>) -> Vec<(&str, &str)> {
    // cuts: (start, text_end, joiner_end) byte offsets, contiguous and covering `text`.
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    let mut carry_start: Option<usize> = None;
    for (start, text_end, joiner_end) in cuts {
        if start == text_end {
            match out.last_mut() {
                Some(last) => last.2 = joiner_end,
                None => carry_start = Some(carry_start.unwrap_or(start)),
            }
            continue;
        }
        let start = carry_start.take().unwrap_or(start);
        out.push((start, text_end, joiner_end));
    }
    if let Some(cs) = carry_start {
        // Only separators: keep everything as one unit so nothing is lost.
        out.push((cs, text.len(), text.len()));
    }
    out.into_iter()
        .map(|(s, t, j)| (&text[s..t], &text[t..j]))
        .collect()
}

fn paragraph_pieces(text: &str) -> Vec<(&str, &str)> {
    let paras = Paragraphs::split(text);
    let mut cuts = Vec::with_capacity(paras.parts.len());
    let mut pos = 0;
    for (i, part) in paras.parts.iter().enumerate() {
        let sep = paras.separators.get(i).map_or(0, |s| s.len());
        cuts.push((pos, pos + part.len(), pos + part.len() + sep));
        pos += part.len() + sep;
    }
    compact(text, cuts)
}

fn section_pieces(text: &str) -> Vec<(&str, &str)> {
    // Byte offsets of lines that start a new section.
    let mut starts = vec![0];
    let mut in_fence = false;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
            in_fence = !in_fence;
        } else if !in_fence && offset > 0 && is_heading_line(line) {
            starts.push(offset);
        }
        offset += line.len();
    }
    let mut cuts = Vec::with_capacity(starts.len());
    for (i, &s) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(text.len());
        // The newline(s) that precede the next heading become the joiner.
        let body = &text[s..end];
        let text_end = if i + 1 < starts.len() {
            s + body.trim_end_matches('\n').len()
        } else {
            end
        };
        cuts.push((s, text_end, end));
    }
    compact(text, cuts)
}

fn is_heading_line(line: &str) -> bool {
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    (1..=6).contains(&hashes)
        && line[hashes..]
            .chars()
            .next()
            .is_none_or(|c| c == ' ' || c == '\t' || c == '\n' || c == '\r')
}

fn sentence_end_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[.?!]+(\s+)\p{Lu}").unwrap())
}

/// Tokens after which a period does not end a sentence. Best-effort, lowercase.
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "sv", "mag", "dipl", "ing", "npr", "itd", "idr",
    "oz", "tj", "t.i", "gl", "str", "št", "jan", "feb", "avg", "sept", "okt", "nov", "dec",
    "etc", "vs", "no", "inc", "ltd", "jr", "sr",
];

fn sentence_pieces(text: &str) -> Vec<(&str, &str)> {
    let mut cuts = Vec::new();
    let mut pos = 0;
    let mut search = 0;
    while let Some(caps) = sentence_end_re().captures_at(text, search) {
        let ws = caps.get(1).expect("group 1 always participates");
        search = ws.end();
        let punct_start = caps.get(0).unwrap().start();
        if text[punct_start..].starts_with('.') && is_abbreviation(&text[pos..punct_start]) {
            continue;
        }
        cuts.push((pos, ws.start(), ws.end()));
        pos = ws.end();
    }
    cuts.push((pos, text.len(), text.len()));
    compact(text, cuts)
}

fn is_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || c == '(' || c == '"')
        .next()
        .unwrap_or("");
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    // Single-letter initials such as "J." in "J. Novak".
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return c.is_alphabetic();
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}
