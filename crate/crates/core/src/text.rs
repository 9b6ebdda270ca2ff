//! Small text helpers shared by several stages.

use std::sync::OnceLock;

use regex::Regex;

/// A blank line: a newline followed by one or more lines holding only
/// spaces or tabs.
pub fn blank_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n(?:[ \t]*\n)+").unwrap())
}

/// Text split on blank lines. `parts.len() == separators.len() + 1`, and
/// interleaving the two reproduces the input exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraphs<'a> {
    pub parts: Vec<&'a str>,
    pub separators: Vec<&'a str>,
}

impl<'a> Paragraphs<'a> {
    pub fn split(text: &'a str) -> Self {
        let mut parts = Vec::new();
        let mut separators = Vec::new();
        let mut last = 0;
        for m in blank_line_re().find_iter(text) {
            parts.push(&text[last..m.start()]);
            separators.push(m.as_str());
            last = m.end();
        }
        parts.push(&text[last..]);
        Paragraphs { parts, separators }
    }

    /// Rebuild the text keeping only the parts for which `keep` is true.
    /// Kept parts are joined by the separator that originally followed the
    /// earlier of the two, so no new separator text is ever produced.
    pub fn retain(&self, mut keep: impl FnMut(usize, &str) -> bool) -> String {
        let mut out = String::new();
        let mut emitted_any = false;
        let mut pending_sep: Option<&str> = None;
        for (i, part) in self.parts.iter().enumerate() {
            if keep(i, part) {
                if emitted_any {
                    out.push_str(pending_sep.unwrap_or(""));
                }
                out.push_str(part);
                emitted_any = true;
                pending_sep = None;
            }
            if let Some(sep) = self.separators.get(i) {
                if pending_sep.is_none() || !emitted_any {
                    pending_sep = Some(sep);
                }
            }
        }
        out
    }
}

/// Number of Unicode scalar values.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Size of the changed region between two strings, in characters: the longer
/// side minus the common prefix and suffix.
pub fn changed_chars(before: &str, after: &str) -> usize {
    if before == after {
        return 0;
    }
    let a: Vec<char> = before.chars().collect();
    let b: Vec<char> = after.chars().collect();
    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let max_suffix = a.len().min(b.len()) - prefix;
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take(max_suffix)
        .take_while(|(x, y)| x == y)
        .count();
    a.len().max(b.len()) - prefix - suffix
}
