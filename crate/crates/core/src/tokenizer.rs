//! Tokenizer abstraction consumed by the packer and the statistics command.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub type TokenId = u32;

pub trait Tokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Vec<TokenId>;
    fn decode(&self, ids: &[TokenId]) -> String;
    fn bos_id(&self) -> TokenId;
    fn eos_id(&self) -> TokenId;
    fn vocab_size(&self) -> usize;
}

/// One token per UTF-8 byte, ids offset by 3. Id 0 is reserved, 1 is BOS and
/// 2 is EOS (which doubles as padding).
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub const OFFSET: TokenId = 3;
}

impl Tokenizer for ByteTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId> {
        text.bytes().map(|b| b as TokenId + Self::OFFSET).collect()
    }

    fn decode(&self, ids: &[TokenId]) -> String {
        let bytes: Vec<u8> = ids
            .iter()
            .filter(|&&id| (Self::OFFSET..Self::OFFSET + 256).contains(&id))
            .map(|&id| (id - Self::OFFSET) as u8)
            .collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn bos_id(&self) -> TokenId {
        1
    }

    fn eos_id(&self) -> TokenId {
        2
    }

    fn vocab_size(&self) -> usize {
        Self::OFFSET as usize + 256
    }
}

/// Greedy longest-match tokenizer over a vocabulary file, with byte fallback
/// for anything the vocabulary does not cover.
///
/// The file is JSON: `{"tokens": [...], "bos_id": n, "eos_id": m}`. Ids
/// `0..tokens.len()` are the listed strings; the 256 byte-fallback ids follow.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    tokens: Vec<String>,
    lookup: HashMap<String, TokenId>,
    max_token_bytes: usize,
    bos: TokenId,
    eos: TokenId,
}

#[derive(Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    bos_id: TokenId,
    eos_id: TokenId,
}

impl VocabTokenizer {
    pub fn new(tokens: Vec<String>, bos_id: TokenId, eos_id: TokenId) -> Result<Self> {
        if bos_id == eos_id {
            return Err(Error::Config("bos_id and eos_id must differ".into()));
        }
        let size = tokens.len() + 256;
        if bos_id as usize >= size || eos_id as usize >= size {
            return Err(Error::Config("bos_id/eos_id outside the vocabulary".into()));
        }
        let mut lookup = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            // Special tokens never match ordinary text.
            if !t.is_empty() && i as TokenId != bos_id && i as TokenId != eos_id {
                lookup.entry(t.clone()).or_insert(i as TokenId);
            }
        }
        let max_token_bytes = lookup.keys().map(String::len).max().unwrap_or(0);
        Ok(VocabTokenizer {
            tokens,
            lookup,
            max_token_bytes,
            bos: bos_id,
            eos: eos_id,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: VocabFile = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("vocabulary {}: {e}", path.display())))?;
        Self::new(file.tokens, file.bos_id, file.eos_id)
    }

    fn byte_id(&self, b: u8) -> TokenId {
        (self.tokens.len() + b as usize) as TokenId
    }
}

impl Tokenizer for VocabTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let mut matched = None;
            let mut len = self.max_token_bytes.min(rest.len());
            while len > 0 {
                if rest.is_char_boundary(len) {
                    if let Some(&id) = self.lookup.get(&rest[..len]) {
                        matched = Some((id, len));
                        break;
                    }
                }
                len -= 1;
            }
            match matched {
                Some((id, len)) => {
                    out.push(id);
                    pos += len;
                }
                None => {
                    let ch_len = rest.chars().next().map_or(1, char::len_utf8);
                    out.extend(rest.as_bytes()[..ch_len].iter().map(|&b| self.byte_id(b)));
                    pos += ch_len;
                }
            }
        }
        out
    }

    fn decode(&self, ids: &[TokenId]) -> String {
        let mut bytes = Vec::new();
        for &id in ids {
            if id == self.bos || id == self.eos {
                continue;
            }
            let idx = id as usize;
            if idx < self.tokens.len() {
                bytes.extend_from_slice(self.tokens[idx].as_bytes());
            } else if idx < self.tokens.len() + 256 {
                bytes.push((idx - self.tokens.len()) as u8);
            }
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn bos_id(&self) -> TokenId {
        self.bos
    }

    fn eos_id(&self) -> TokenId {
        self.eos
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len() + 256
    }
}

/// Resolve a tokenizer from its command-line form: `reference` or
/// `external:<vocab.json>`.
pub fn tokenizer_from_spec(spec: &str) -> Result<Box<dyn Tokenizer>> {
    if spec == "reference" {
        return Ok(Box::new(ByteTokenizer));
    }
    if let Some(path) = spec.strip_prefix("external:") {
        return Ok(Box::new(VocabTokenizer::from_file(Path::new(path))?));
    }
    Err(Error::Config(format!(
        "unknown tokenizer {spec:?} (expected `reference` or `external:<vocab.json>`)"
    )))
}
