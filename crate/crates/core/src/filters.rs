//! Text-cleaning filters for OCR'd and web markdown.
//!
//! Four filters run on every corpus: image removal, newline normalization,
//! unicode repair and Slovene caron correction. The `nanonets` profile adds
//! two artifact filters that drop over-long paragraphs and collapse
//! paragraphs repeated by a cycling OCR model.
//!
//! Every filter is idempotent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::document::Document;
use crate::error::{Error, Result};
use crate::text::{changed_chars, char_len, Paragraphs};

pub const DEFAULT_MAX_PARAGRAPH_CHARS: usize = 15_000;
pub const DEFAULT_MAX_REPEATS: usize = 100;

/// Upper bound on rewrite passes for the fixpoint filters.
const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterName {
    RemoveImages,
    NormalizeNewlines,
    ReformatUnicode,
    CorrectDiacritics,
    FilterLongParagraphs,
    CollapseRepeatedParagraphs,
}

impl FilterName {
    pub const ALL: [FilterName; 6] = [
        FilterName::RemoveImages,
        FilterName::NormalizeNewlines,
        FilterName::ReformatUnicode,
        FilterName::CorrectDiacritics,
        FilterName::FilterLongParagraphs,
        FilterName::CollapseRepeatedParagraphs,
    ];

    /// Filters applied to every corpus.
    pub const BASE: [FilterName; 4] = [
        FilterName::RemoveImages,
        FilterName::NormalizeNewlines,
        FilterName::ReformatUnicode,
        FilterName::CorrectDiacritics,
    ];

    /// Filters appended by the `nanonets` profile.
    pub const NANONETS: [FilterName; 2] = [
        FilterName::FilterLongParagraphs,
        FilterName::CollapseRepeatedParagraphs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterName::RemoveImages => "remove_images",
            FilterName::NormalizeNewlines => "normalize_newlines",
            FilterName::ReformatUnicode => "reformat_unicode",
            FilterName::CorrectDiacritics => "correct_diacritics",
            FilterName::FilterLongParagraphs => "filter_long_paragraphs",
            FilterName::CollapseRepeatedParagraphs => "collapse_repeated_paragraphs",
        }
    }

    fn removes_paragraphs(self) -> bool {
        matches!(
            self,
            FilterName::FilterLongParagraphs | FilterName::CollapseRepeatedParagraphs
        )
    }
}

impl fmt::Display for FilterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown filter {s:?}")))
    }
}

fn image_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"!\[[^\]\n]*\]\([^)\n]*\)").unwrap())
}

/// Remove markdown embedded images `![alt](url)`. Nothing outside the image
/// spans changes.
pub fn remove_images(text: &str) -> String {
    let mut cur = text.to_owned();
    // Removing one span can expose another (`!![a](u)[b](v)`), so repeat.
    for _ in 0..MAX_PASSES {
        match image_re().replace_all(&cur, "") {
            std::borrow::Cow::Borrowed(_) => break,
            std::borrow::Cow::Owned(next) => cur = next,
        }
    }
    cur
}

fn newline_run_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n{3,}").unwrap())
}

/// Truncate every run of three or more newlines to exactly two.
pub fn normalize_newlines(text: &str) -> String {
    newline_run_re().replace_all(text, "\n\n").into_owned()
}

/// Table of mis-decoded character sequences and their repairs.
#[derive(Debug, Clone)]
pub struct MojibakeMap {
    entries: HashMap<String, String>,
    max_key_chars: usize,
}

/// Characters whose UTF-8 encoding is commonly mis-decoded. Slovene and
/// neighbouring Latin letters plus typographic punctuation.
const MOJIBAKE_TARGETS: &str = "čšžČŠŽćĆđĐ\
    àáâãäåæçèéêëìíîïñòóôõöøùúûüýÿßœŒ\
    ÀÁÂÃÄÅÆÇÈÉÊËÌÍÎÏÑÒÓÔÕÖØÙÚÛÜÝ\
    ľĽĺĹŕŔřŘňŇťŤďĎěĚůŮőŐűŰłŁńŃśŚźŹżŻąĄęĘ\
    „“”‘’‚–—…€•°«»";

/// Characters produced by [`correct_diacritics`]. Keys containing them are left
/// out of the default table so that running the caron corrector after the
/// unicode reformatter can never create a fresh mojibake key.
const CARON_LETTERS: &str = "čšžČŠŽ";

impl MojibakeMap {
    pub fn empty() -> Self {
        MojibakeMap {
            entries: HashMap::new(),
            max_key_chars: 0,
        }
    }

    /// UTF-8 read as Latin-1 and UTF-8 read as Windows-1250.
    pub fn default_table() -> Self {
        let mut map = MojibakeMap::empty();
        for ch in MOJIBAKE_TARGETS.chars() {
            let mut buf = [0u8; 4];
            let bytes = ch.encode_utf8(&mut buf).as_bytes();
            let latin1: String = bytes.iter().map(|&b| b as char).collect();
            let (cp1250, _) = encoding_rs::WINDOWS_1250.decode_without_bom_handling(bytes);
            for key in [latin1, cp1250.into_owned()] {
                if key.chars().any(|c| CARON_LETTERS.contains(c)) {
                    continue;
                }
                map.insert_if_absent(key, ch.to_string());
            }
        }
        map
    }

    fn insert_if_absent(&mut self, key: String, value: String) {
        if key.chars().count() < 2 || key == value {
            return;
        }
        self.max_key_chars = self.max_key_chars.max(key.chars().count());
        self.entries.entry(key).or_insert(value);
    }

    /// Add or override an entry. Keys must be non-empty.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<()> {
        let key = key.into();
        if key.is_empty() {
            return Err(Error::Config("mojibake map key is empty".into()));
        }
        self.max_key_chars = self.max_key_chars.max(key.chars().count());
        self.entries.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One left-to-right pass, longest key first at each position.
    fn apply_once(&self, text: &str) -> String {
        if self.entries.is_empty() {
            return text.to_owned();
        }
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            for len in (1..=self.max_key_chars.min(chars.len() - i)).rev() {
                let start = chars[i].0;
                let end = chars.get(i + len).map_or(text.len(), |c| c.0);
                if let Some(v) = self.entries.get(&text[start..end]) {
                    out.push_str(v);
                    i += len;
                    continue 'outer;
                }
            }
            out.push(chars[i].1);
            i += 1;
        }
        out
    }
}

impl Default for MojibakeMap {
    fn default() -> Self {
        MojibakeMap::default_table()
    }
}

/// Repair mis-decoded sequences from `map`, then NFC-normalize. Repeats until
/// the text is stable.
pub fn reformat_unicode_with(text: &str, map: &MojibakeMap) -> String {
    let mut cur: String = text.nfc().collect();
    for _ in 0..MAX_PASSES {
        let next: String = map.apply_once(&cur).nfc().collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

pub fn reformat_unicode(text: &str) -> String {
    static MAP: OnceLock<MojibakeMap> = OnceLock::new();
    reformat_unicode_with(text, MAP.get_or_init(MojibakeMap::default_table))
}

const SPACING_CARON: char = '\u{02C7}';
const COMBINING_CARON: char = '\u{030C}';

fn with_caron(c: char) -> Option<char> {
    Some(match c {
        'c' => 'č',
        's' => 'š',
        'z' => 'ž',
        'C' => 'Č',
        'S' => 'Š',
        'Z' => 'Ž',
        _ => return None,
    })
}

/// Replace broken forms of č, š and ž: a spacing caron (ˇ) directly before or
/// after c/s/z (either case), and a letter followed by a combining caron.
/// A caron before a letter takes precedence over one after.
pub fn correct_diacritics(text: &str) -> String {
    correct_diacritics_with(text, &[])
}

/// [`correct_diacritics`] preceded by extra literal replacements from
/// configuration.
pub fn correct_diacritics_with(text: &str, extra: &[(String, String)]) -> String {
    let mut cur = text.to_owned();
    for _ in 0..MAX_PASSES {
        let mut next = cur.clone();
        for (from, to) in extra {
            if !from.is_empty() {
                next = next.replace(from.as_str(), to);
            }
        }
        next = caron_pass(&next);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn caron_pass(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<char> = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == SPACING_CARON {
            if let Some(fixed) = chars.get(i + 1).and_then(|&n| with_caron(n)) {
                out.push(fixed);
                i += 2;
                continue;
            }
            if let Some(fixed) = out.last().and_then(|&p| with_caron(p)) {
                *out.last_mut().unwrap() = fixed;
                i += 1;
                continue;
            }
        } else if let Some(fixed) = with_caron(c) {
            if chars.get(i + 1) == Some(&COMBINING_CARON) {
                out.push(fixed);
                i += 2;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out.into_iter().collect()
}

/// Drop blank-line-delimited paragraphs longer than `max_chars` characters.
pub fn filter_long_paragraphs(text: &str, max_chars: usize) -> String {
    filter_long_paragraphs_counted(text, max_chars).0
}

fn filter_long_paragraphs_counted(text: &str, max_chars: usize) -> (String, usize) {
    let paras = Paragraphs::split(text);
    let mut removed = 0;
    let out = paras.retain(|_, p| {
        let keep = char_len(p) <= max_chars;
        removed += usize::from(!keep);
        keep
    });
    (out, removed)
}

/// Keep only the first occurrence of any paragraph that occurs more than
/// `max_repeats` times.
pub fn collapse_repeated_paragraphs(text: &str, max_repeats: usize) -> String {
    collapse_repeated_counted(text, max_repeats).0
}

fn collapse_repeated_counted(text: &str, max_repeats: usize) -> (String, usize) {
    let paras = Paragraphs::split(text);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in paras.parts.iter().filter(|p| !p.is_empty()) {
        *counts.entry(p).or_default() += 1;
    }
    if counts.values().all(|&n| n <= max_repeats) {
        return (text.to_owned(), 0);
    }
    let mut seen: HashMap<&str, bool> = HashMap::new();
    let mut removed = 0;
    let out = paras.retain(|i, _| {
        let p = paras.parts[i];
        if p.is_empty() || counts[p] <= max_repeats {
            return true;
        }
        let first = seen.insert(p, true).is_none();
        removed += usize::from(!first);
        first
    });
    (out, removed)
}

/// A filter together with its parameters.
#[derive(Debug, Clone)]
pub enum FilterStep {
    RemoveImages,
    NormalizeNewlines,
    ReformatUnicode(MojibakeMap),
    CorrectDiacritics(Vec<(String, String)>),
    FilterLongParagraphs { max_chars: usize },
    CollapseRepeatedParagraphs { max_repeats: usize },
}

impl FilterStep {
    pub fn with_defaults(name: FilterName) -> Self {
        match name {
            FilterName::RemoveImages => FilterStep::RemoveImages,
            FilterName::NormalizeNewlines => FilterStep::NormalizeNewlines,
            FilterName::ReformatUnicode => FilterStep::ReformatUnicode(MojibakeMap::default_table()),
            FilterName::CorrectDiacritics => FilterStep::CorrectDiacritics(Vec::new()),
            FilterName::FilterLongParagraphs => FilterStep::FilterLongParagraphs {
                max_chars: DEFAULT_MAX_PARAGRAPH_CHARS,
            },
            FilterName::CollapseRepeatedParagraphs => FilterStep::CollapseRepeatedParagraphs {
                max_repeats: DEFAULT_MAX_REPEATS,
            },
        }
    }

    pub fn name(&self) -> FilterName {
        match self {
            FilterStep::RemoveImages => FilterName::RemoveImages,
            FilterStep::NormalizeNewlines => FilterName::NormalizeNewlines,
            FilterStep::ReformatUnicode(_) => FilterName::ReformatUnicode,
            FilterStep::CorrectDiacritics(_) => FilterName::CorrectDiacritics,
            FilterStep::FilterLongParagraphs { .. } => FilterName::FilterLongParagraphs,
            FilterStep::CollapseRepeatedParagraphs { .. } => FilterName::CollapseRepeatedParagraphs,
        }
    }

    /// Returns the new text and the number of paragraphs removed.
    pub fn apply(&self, text: &str) -> (String, usize) {
        match self {
            FilterStep::RemoveImages => (remove_images(text), 0),
            FilterStep::NormalizeNewlines => (normalize_newlines(text), 0),
            FilterStep::ReformatUnicode(map) => (reformat_unicode_with(text, map), 0),
            FilterStep::CorrectDiacritics(extra) => (correct_diacritics_with(text, extra), 0),
            FilterStep::FilterLongParagraphs { max_chars } => {
                filter_long_paragraphs_counted(text, *max_chars)
            }
            FilterStep::CollapseRepeatedParagraphs { max_repeats } => {
                collapse_repeated_counted(text, *max_repeats)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub docs_in: u64,
    pub docs_out: u64,
    pub paragraphs_removed: u64,
    pub chars_changed: u64,
    /// Documents modified, per filter.
    pub per_filter: BTreeMap<String, u64>,
    /// Ids of documents dropped because nothing but whitespace was left.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

impl FilterReport {
    pub fn merge(&mut self, other: &FilterReport) {
        self.docs_in += other.docs_in;
        self.docs_out += other.docs_out;
        self.paragraphs_removed += other.paragraphs_removed;
        self.chars_changed += other.chars_changed;
        for (k, v) in &other.per_filter {
            *self.per_filter.entry(k.clone()).or_default() += v;
        }
        self.dropped.extend(other.dropped.iter().cloned());
    }
}

/// An ordered, configured list of filters.
#[derive(Debug, Clone, Default)]
pub struct FilterPipeline {
    pub steps: Vec<FilterStep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineFile {
    #[serde(default)]
    filter: Vec<StepEntry>,
    #[serde(default)]
    mojibake: BTreeMap<String, String>,
    #[serde(default)]
    diacritics: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepEntry {
    name: String,
    max_chars: Option<usize>,
    max_repeats: Option<usize>,
}

impl FilterPipeline {
    /// The base filters, plus the artifact filters when `nanonets` is set.
    pub fn default_profile(nanonets: bool) -> Self {
        let mut names = FilterName::BASE.to_vec();
        if nanonets {
            names.extend(FilterName::NANONETS);
        }
        Self::from_names(&names)
    }

    pub fn from_names(names: &[FilterName]) -> Self {
        FilterPipeline {
            steps: names.iter().map(|&n| FilterStep::with_defaults(n)).collect(),
        }
    }

    pub fn parse_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names = names
            .iter()
            .map(|n| n.as_ref().parse())
            .collect::<Result<Vec<FilterName>>>()?;
        Ok(Self::from_names(&names))
    }

    /// Append the artifact filters for a named profile. Only `nanonets` is
    /// known.
    pub fn with_profile(mut self, profile: &str) -> Result<Self> {
        match profile {
            "nanonets" => {
                for name in FilterName::NANONETS {
                    if !self.steps.iter().any(|s| s.name() == name) {
                        self.steps.push(FilterStep::with_defaults(name));
                    }
                }
                Ok(self)
            }
            other => Err(Error::Config(format!("unknown filter profile {other:?}"))),
        }
    }

    /// Load from a TOML file:
    ///
    /// ```toml
    /// [[filter]]
    /// name = "remove_images"
    /// [[filter]]
    /// name = "filter_long_paragraphs"
    /// max_chars = 20000
    ///
    /// [mojibake]
    /// "Ã¨" = "č"
    /// [diacritics]
    /// "è" = "č"
    /// ```
    pub fn from_toml(src: &str) -> Result<Self> {
        let file: PipelineFile =
            toml::from_str(src).map_err(|e| Error::Config(format!("filter config: {e}")))?;
        let mut map = MojibakeMap::default_table();
        for (k, v) in &file.mojibake {
            map.insert(k.clone(), v.clone())?;
        }
        let extra: Vec<(String, String)> = file.diacritics.into_iter().collect();
        let mut steps = Vec::new();
        for entry in file.filter {
            let name: FilterName = entry.name.parse()?;
            let step = match name {
                FilterName::ReformatUnicode => FilterStep::ReformatUnicode(map.clone()),
                FilterName::CorrectDiacritics => FilterStep::CorrectDiacritics(extra.clone()),
                FilterName::FilterLongParagraphs => FilterStep::FilterLongParagraphs {
                    max_chars: positive(entry.max_chars, DEFAULT_MAX_PARAGRAPH_CHARS, "max_chars")?,
                },
                FilterName::CollapseRepeatedParagraphs => FilterStep::CollapseRepeatedParagraphs {
                    max_repeats: positive(entry.max_repeats, DEFAULT_MAX_REPEATS, "max_repeats")?,
                },
                other => FilterStep::with_defaults(other),
            };
            if (entry.max_chars.is_some() && name != FilterName::FilterLongParagraphs)
                || (entry.max_repeats.is_some() && name != FilterName::CollapseRepeatedParagraphs)
            {
                return Err(Error::Config(format!("filter {name} takes no such parameter")));
            }
            steps.push(step);
        }
        Ok(FilterPipeline { steps })
    }

    pub fn apply(&self, doc: &Document) -> (Document, FilterReport) {
        let mut report = FilterReport {
            docs_in: 1,
            ..FilterReport::default()
        };
        for step in &self.steps {
            report.per_filter.entry(step.name().to_string()).or_default();
        }
        let mut text = doc.text.clone();
        for step in &self.steps {
            let (next, removed) = step.apply(&text);
            if next != text {
                *report.per_filter.get_mut(step.name().as_str()).unwrap() += 1;
                report.chars_changed += changed_chars(&text, &next) as u64;
                if step.name().removes_paragraphs() {
                    report.paragraphs_removed += removed as u64;
                }
                text = next;
            }
        }
        let empty = text.trim().is_empty() && !doc.text.trim().is_empty();
        if empty {
            report.dropped.push(doc.id.clone());
        } else {
            report.docs_out = 1;
        }
        let mut out = doc.clone();
        out.text = text;
        (out, report)
    }
}

fn positive(value: Option<usize>, default: usize, what: &str) -> Result<usize> {
    match value {
        Some(0) => Err(Error::Config(format!("{what} must be positive"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

/// Apply filters by name, in order, with default parameters. `docs_out` is 0
/// when filtering left only whitespace behind; callers drop such documents.
pub fn apply_pipeline<S: AsRef<str>>(doc: &Document, filters: &[S]) -> Result<(Document, FilterReport)> {
    let pipeline = FilterPipeline::parse_names(filters)?;
    Ok(pipeline.apply(doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_removed_locally() {
        assert_eq!(remove_images("a ![fig](x.png) b"), "a  b");
        assert_eq!(remove_images("no images"), "no images");
        assert_eq!(remove_images("![a](u)![b](v)"), "");
        assert_eq!(remove_images("!![a](u)[b](v)"), "");
        assert_eq!(remove_images("[link](u) stays"), "[link](u) stays");
    }

    #[test]
    fn newline_runs_truncated() {
        assert_eq!(normalize_newlines("a\n\n\n\nb"), "a\n\nb");
        assert_eq!(normalize_newlines("a\n\nb"), "a\n\nb");
        assert_eq!(normalize_newlines("\n\n\n"), "\n\n");
    }

    #[test]
    fn nfc_composes_caron() {
        let decomposed = "zac\u{030C}etek";
        assert_eq!(reformat_unicode(decomposed), "začetek");
        assert_eq!(reformat_unicode("že čista"), "že čista");
    }

    #[test]
    fn latin1_mojibake_repaired() {
        // Oracle: encode č as UTF-8 and read those bytes back as Latin-1.
        let bytes = "č".as_bytes();
        let misread: String = bytes.iter().map(|&b| b as char).collect();
        assert_eq!(misread, "Ä\u{008D}");
        assert_eq!(MojibakeMap::default_table().get(&misread), Some("č"));
        assert_eq!(reformat_unicode("zaÄ\u{008D}etek"), "začetek");
    }

    #[test]
    fn cp1250_mojibake_repaired() {
        let (misread, _) = encoding_rs::WINDOWS_1250.decode_without_bom_handling("š".as_bytes());
        assert_eq!(misread, "Ĺˇ");
        assert_eq!(reformat_unicode("Ĺˇola"), "šola");
    }

    #[test]
    fn default_table_avoids_caron_letters() {
        let map = MojibakeMap::default_table();
        assert!(map.entries.keys().all(|k| !k.chars().any(|c| CARON_LETTERS.contains(c))));
        assert!(map.len() > 100);
    }

    #[test]
    fn caron_before_and_after() {
        assert_eq!(correct_diacritics("ˇclanek"), "članek");
        assert_eq!(correct_diacritics("sˇola"), "šola");
        assert_eq!(correct_diacritics("cena"), "cena");
        assert_eq!(correct_diacritics("Zˇ in ˇZ"), "Ž in Ž");
        assert_eq!(correct_diacritics("ˇa"), "ˇa");
        assert_eq!(correct_diacritics("c\u{030C}rka"), "črka");
    }

    #[test]
    fn extra_diacritic_mappings() {
        let extra = vec![("è".to_string(), "č".to_string())];
        assert_eq!(correct_diacritics_with("maèka", &extra), "mačka");
        assert_eq!(correct_diacritics("maèka"), "maèka");
    }

    #[test]
    fn long_paragraph_boundary() {
        let at = "a".repeat(15_000);
        let over = "b".repeat(15_001);
        let text = format!("x\n\n{at}\n\n{over}\n\ny");
        assert_eq!(filter_long_paragraphs(&text, 15_000), format!("x\n\n{at}\n\ny"));
        assert_eq!(filter_long_paragraphs("p\n\nq", 15_000), "p\n\nq");
        // Characters, not bytes.
        let wide = "č".repeat(15_000);
        assert_eq!(filter_long_paragraphs(&wide, 15_000), wide);
    }

    #[test]
    fn repeat_boundary() {
        let rep = |n: usize| vec!["P"; n].join("\n\n");
        assert_eq!(collapse_repeated_paragraphs(&rep(101), 100), "P");
        assert_eq!(collapse_repeated_paragraphs(&rep(100), 100), rep(100));
        assert_eq!(collapse_repeated_paragraphs("A\n\nB\n\nA", 100), "A\n\nB\n\nA");
        let mixed = format!("head\n\n{}\n\ntail", rep(101));
        assert_eq!(collapse_repeated_paragraphs(&mixed, 100), "head\n\nP\n\ntail");
    }

    #[test]
    fn composition_example() {
        let doc = Document::new("d", "a ![i](u) b\n\n\n\nc");
        let (out, report) = apply_pipeline(&doc, &["remove_images", "normalize_newlines"]).unwrap();
        assert_eq!(out.text, "a  b\n\nc");
        assert_eq!(report.per_filter["remove_images"], 1);
        assert_eq!(report.per_filter["normalize_newlines"], 1);
        assert_eq!(report.docs_out, 1);
    }

    #[test]
    fn empty_filter_list_is_identity() {
        let doc = Document::new("d", "anything ![x](y)");
        let (out, report) = apply_pipeline::<&str>(&doc, &[]).unwrap();
        assert_eq!(out, doc);
        assert_eq!(report.chars_changed, 0);
        assert!(report.per_filter.is_empty());
        assert_eq!(report.docs_in, 1);
        assert_eq!(report.docs_out, 1);
    }

    #[test]
    fn unknown_filter_is_config_error() {
        let doc = Document::new("d", "x");
        assert!(matches!(apply_pipeline(&doc, &["nope"]), Err(Error::Config(_))));
    }

    #[test]
    fn image_only_document_is_dropped() {
        let doc = Document::new("d", "![x](y)");
        let (_, report) = apply_pipeline(&doc, &["remove_images"]).unwrap();
        assert_eq!(report.docs_out, 0);
        assert_eq!(report.dropped, vec!["d".to_string()]);
    }

    #[test]
    fn report_counts_removed_paragraphs() {
        let text = format!("{}\n\nkeep", vec!["R"; 102].join("\n\n"));
        let doc = Document::new("d", text);
        let p = FilterPipeline::default_profile(true);
        let (out, report) = p.apply(&doc);
        assert_eq!(out.text, "R\n\nkeep");
        assert_eq!(report.paragraphs_removed, 101);
    }

    #[test]
    fn toml_config() {
        let p = FilterPipeline::from_toml(
            r#"
            [[filter]]
            name = "correct_diacritics"
            [[filter]]
            name = "filter_long_paragraphs"
            max_chars = 3
            [diacritics]
            "è" = "č"
            "#,
        )
        .unwrap();
        let (out, _) = p.apply(&Document::new("d", "maèka\n\nok"));
        assert_eq!(out.text, "ok");
        assert!(FilterPipeline::from_toml("[[filter]]\nname = \"remove_images\"\nmax_chars = 3").is_err());
        assert!(FilterPipeline::from_toml("[[filter]]\nname = \"filter_long_paragraphs\"\nmax_chars = 0").is_err());
        assert!(FilterPipeline::from_toml("[[filter]]\nname = \"bogus\"").is_err());
    }

    #[test]
    fn profile_appends_artifact_filters() {
        let p = FilterPipeline::default_profile(false).with_profile("nanonets").unwrap();
        let names: Vec<_> = p.steps.iter().map(FilterStep::name).collect();
        assert_eq!(&names[4..], &FilterName::NANONETS);
        assert!(FilterPipeline::default().with_profile("marker").is_err());
    }
}
