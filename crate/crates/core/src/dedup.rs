//! Near-duplicate removal with MinHash LSH, and ROUGE-L novelty filtering.
//!
//! Documents are shingled into hashed word n-grams, sketched with 256
//! universal-hash permutations and indexed in 32 bands of 8 rows. With that
//! banding a pair collides in at least one band with probability
//! `1 - (1 - J^8)^32`, whose midpoint `(1/32)^(1/8) ≈ 0.648` sits on the
//! default similarity threshold of 0.65.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::{xxh3_64, xxh3_64_with_seed};

use crate::document::Document;
use crate::error::{Error, Result};

pub const NUM_PERMUTATIONS: usize = 256;
pub const NUM_BANDS: usize = 32;
pub const ROWS_PER_BAND: usize = 8;
pub const DEFAULT_THRESHOLD: f64 = 0.65;
pub const DEFAULT_NGRAM: usize = 5;
pub const DEFAULT_MAX_ROUGE: f64 = 0.7;
/// Group used for documents lacking the `group_by` meta key.
pub const UNGROUPED: &str = "ungrouped";

const _: () = assert!(NUM_BANDS * ROWS_PER_BAND == NUM_PERMUTATIONS);

/// Mersenne prime 2^61 - 1, the modulus of the permutation family.
const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub shingles: HashSet<u64>,
    pub n: usize,
}

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }
}

/// Hash every window of `n` consecutive lowercase whitespace-separated words.
/// Texts with fewer than `n` words yield one shingle of the whole (lowercased,
/// whitespace-collapsed) text.
pub fn shingle(text: &str, n: usize) -> Result<ShingleSet> {
    if n == 0 {
        return Err(Error::Config("shingle size must be at least 1".into()));
    }
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let mut shingles = HashSet::new();
    if words.len() < n {
        shingles.insert(hash_words(&words));
    } else {
        for window in words.windows(n) {
            shingles.insert(hash_words(window));
        }
    }
    Ok(ShingleSet { shingles, n })
}

fn hash_words(words: &[&str]) -> u64 {
    // Words never contain whitespace, so a single space is an unambiguous joiner.
    xxh3_64(words.join(" ").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub slots: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    pub fn num_permutations(&self) -> usize {
        self.slots.len()
    }
}

/// The `(a, b)` coefficients of `h -> (a*h + b) mod (2^61 - 1)` for each
/// permutation, drawn from a ChaCha stream seeded by `seed`.
#[derive(Debug, Clone)]
pub struct Permutations {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl Permutations {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..NUM_PERMUTATIONS)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        Permutations { seed, coeffs }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signature(&self, set: &ShingleSet) -> Result<MinHashSignature> {
        if set.is_empty() {
            return Err(Error::Contract(
                "minhash of an empty shingle set is undefined".into(),
            ));
        }
        let mut slots = vec![u64::MAX; NUM_PERMUTATIONS];
        for &h in &set.shingles {
            let x = mod_mersenne(h as u128);
            for (slot, &(a, b)) in slots.iter_mut().zip(&self.coeffs) {
                let v = mod_mersenne(a as u128 * x as u128 + b as u128);
                if v < *slot {
                    *slot = v;
                }
            }
        }
        Ok(MinHashSignature {
            slots,
            seed: self.seed,
        })
    }
}

fn mod_mersenne(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let mut r = (x & p) + (x >> 61);
    while r >= p {
        r -= p;
    }
    r as u64
}

/// MinHash signature with 256 permutations derived from `seed`.
pub fn minhash(set: &ShingleSet, seed: u64) -> Result<MinHashSignature> {
    Permutations::new(seed).signature(set)
}

/// Fraction of equal slots.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.slots.len() != b.slots.len() || a.seed != b.seed {
        return Err(Error::Contract(format!(
            "signatures differ in parameters ({} perms / seed {} vs {} perms / seed {})",
            a.slots.len(),
            a.seed,
            b.slots.len(),
            b.seed
        )));
    }
    if a.slots.is_empty() {
        return Err(Error::Contract("empty signatures".into()));
    }
    let equal = a.slots.iter().zip(&b.slots).filter(|(x, y)| x == y).count();
    Ok(equal as f64 / a.slots.len() as f64)
}

/// Banded LSH index over signatures of kept documents.
#[derive(Debug, Clone, Default)]
pub struct LshIndex {
    bands: Vec<HashMap<u64, Vec<usize>>>,
    signatures: Vec<MinHashSignature>,
}

impl LshIndex {
    pub fn new() -> Self {
        LshIndex {
            bands: vec![HashMap::new(); NUM_BANDS],
            signatures: Vec::new(),
        }
    }

    fn band_keys(sig: &MinHashSignature) -> impl Iterator<Item = u64> + '_ {
        sig.slots.chunks(ROWS_PER_BAND).enumerate().map(|(band, rows)| {
            let mut bytes = Vec::with_capacity(ROWS_PER_BAND * 8);
            for r in rows {
                bytes.extend_from_slice(&r.to_le_bytes());
            }
            xxh3_64_with_seed(&bytes, band as u64)
        })
    }

    /// Insert and return the entry id.
    pub fn insert(&mut self, sig: MinHashSignature) -> usize {
        let id = self.signatures.len();
        for (band, key) in Self::band_keys(&sig).enumerate() {
            self.bands[band].entry(key).or_default().push(id);
        }
        self.signatures.push(sig);
        id
    }

    /// Entry ids sharing at least one band bucket with `sig`, ascending.
    pub fn candidates(&self, sig: &MinHashSignature) -> Vec<usize> {
        let mut out: Vec<usize> = Self::band_keys(sig)
            .enumerate()
            .filter_map(|(band, key)| self.bands[band].get(&key))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn signature(&self, id: usize) -> &MinHashSignature {
        &self.signatures[id]
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    /// Append another index's entries after this one's. Ids from `other` are
    /// shifted by `self.len()`.
    pub fn merge(&mut self, other: LshIndex) {
        let offset = self.signatures.len();
        for (band, buckets) in other.bands.into_iter().enumerate() {
            for (key, ids) in buckets {
                self.bands[band]
                    .entry(key)
                    .or_default()
                    .extend(ids.into_iter().map(|i| i + offset));
            }
        }
        self.signatures.extend(other.signatures);
    }
}

#[derive(Debug, Clone)]
pub struct DedupConfig {
    pub threshold: f64,
    pub ngram: usize,
    pub seed: u64,
    pub group_by: Option<String>,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            threshold: DEFAULT_THRESHOLD,
            ngram: DEFAULT_NGRAM,
            seed: 0,
            group_by: None,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "dedup threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.ngram == 0 {
            return Err(Error::Config("ngram must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedPair {
    pub kept_id: String,
    pub removed_id: String,
    pub estimate: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DedupReport {
    pub docs_in: u64,
    pub docs_out: u64,
    pub removed: Vec<RemovedPair>,
    /// Documents routed to the `ungrouped` group for lack of the group key.
    pub ungrouped: u64,
    pub per_group_kept: BTreeMap<String, u64>,
}

struct GroupIndex {
    index: LshIndex,
    ids: Vec<String>,
}

/// Streaming deduplicator: feed documents in order, get keep/remove decisions.
pub struct Deduplicator {
    config: DedupConfig,
    perms: Permutations,
    groups: HashMap<String, GroupIndex>,
    report: DedupReport,
}

impl Deduplicator {
    pub fn new(config: DedupConfig) -> Result<Self> {
        config.validate()?;
        Ok(Deduplicator {
            perms: Permutations::new(config.seed),
            config,
            groups: HashMap::new(),
            report: DedupReport::default(),
        })
    }

    /// Returns `true` when the document should be kept.
    pub fn offer(&mut self, doc: &Document) -> Result<bool> {
        self.report.docs_in += 1;
        let group = match &self.config.group_by {
            None => String::new(),
            Some(key) => match doc.meta.get(key) {
                Some(v) => v.clone(),
                None => {
                    self.report.ungrouped += 1;
                    UNGROUPED.to_owned()
                }
            },
        };
        let sig = self.perms.signature(&shingle(&doc.text, self.config.ngram)?)?;
        let entry = self.groups.entry(group.clone()).or_insert_with(|| GroupIndex {
            index: LshIndex::new(),
            ids: Vec::new(),
        });

        let mut best: Option<(usize, f64)> = None;
        for cand in entry.index.candidates(&sig) {
            let est = estimate_jaccard(entry.index.signature(cand), &sig)?;
            if est >= self.config.threshold && best.is_none_or(|(_, b)| est > b) {
                best = Some((cand, est));
            }
        }
        match best {
            Some((cand, estimate)) => {
                self.report.removed.push(RemovedPair {
                    kept_id: entry.ids[cand].clone(),
                    removed_id: doc.id.clone(),
                    estimate,
                });
                Ok(false)
            }
            None => {
                entry.index.insert(sig);
                entry.ids.push(doc.id.clone());
                self.report.docs_out += 1;
                *self.report.per_group_kept.entry(group).or_default() += 1;
                Ok(true)
            }
        }
    }

    pub fn finish(self) -> DedupReport {
        self.report
    }
}

/// Deduplicate documents in input order. The first member of every cluster
/// is kept; later members are removed when an LSH candidate among the kept
/// documents of the same group has estimated Jaccard >= threshold.
pub fn dedup_corpus<I>(docs: I, config: &DedupConfig) -> Result<(Vec<Document>, DedupReport)>
where
    I: IntoIterator<Item = Document>,
{
    let mut dd = Deduplicator::new(config.clone())?;
    let mut kept = Vec::new();
    for doc in docs {
        if dd.offer(&doc)? {
            kept.push(doc);
        }
    }
    Ok((kept, dd.finish()))
}

/// Length of the longest common subsequence of two token slices.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over whitespace tokens; 0 when either side is empty.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c: Vec<&str> = candidate.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    rouge_l_tokens(&c, &r)
}

fn rouge_l_tokens(c: &[&str], r: &[&str]) -> f64 {
    let lcs = lcs_len(c, r);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / c.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

/// Keep candidates whose ROUGE-L against every pool item and every earlier
/// kept candidate is below `max_rouge`.
pub fn novelty_filter<I, S>(candidates: I, pool: &[String], max_rouge: f64) -> Result<Vec<S>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if !(max_rouge > 0.0 && max_rouge <= 1.0) {
        return Err(Error::Config(format!(
            "max_rouge must lie in (0, 1], got {max_rouge}"
        )));
    }
    let mut seen: Vec<Vec<String>> = pool
        .iter()
        .map(|p| p.split_whitespace().map(str::to_owned).collect())
        .collect();
    let mut kept = Vec::new();
    for cand in candidates {
        let toks: Vec<&str> = cand.as_ref().split_whitespace().collect();
        let novel = seen.iter().all(|s| {
            let s: Vec<&str> = s.iter().map(String::as_str).collect();
            rouge_l_tokens(&toks, &s) < max_rouge
        });
        if novel {
            seen.push(toks.iter().map(|t| (*t).to_owned()).collect());
            kept.push(cand);
        }
    }
    Ok(kept)
}
