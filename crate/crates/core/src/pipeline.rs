//! Configured multi-stage runs over a line-record corpus, and corpus
//! statistics tables.
//!
//! A run config is TOML:
//!
//! ```toml
//! input = "corpus.jsonl"
//! output = "out"
//! seed = 7
//! tokenizer = "reference"
//!
//! [[stage]]
//! name = "filter"
//! profile = "nanonets"
//!
//! [[stage]]
//! name = "dedup"
//! threshold = 0.65
//!
//! [[stage]]
//! name = "pack"
//! context_length = 4096
//! ```
//!
//! Relative paths resolve against the config file's directory. Stage `i`
//! writes `NN-<name>.jsonl` and `NN-<name>.report.json` into the output
//! directory; on failure every file written by the run is removed.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dedup::{dedup_corpus, DedupConfig, DEFAULT_NGRAM, DEFAULT_THRESHOLD};
use crate::document::{Document, RecordReader, RecordWriter, UnitKind};
use crate::error::{Error, Result};
use crate::filters::{FilterName, FilterPipeline};
use crate::packer::{pack_documents, verify_pack, PackConfig};
use crate::tokenizer::{tokenizer_from_spec, Tokenizer};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    input: PathBuf,
    output: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_tokenizer")]
    tokenizer: String,
    #[serde(default)]
    stage: Vec<StageSpec>,
}

fn default_tokenizer() -> String {
    "reference".into()
}

/// One `[[stage]]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    Filter {
        #[serde(default)]
        filters: Option<Vec<String>>,
        #[serde(default)]
        profile: Option<String>,
        /// Path to a filter TOML file; overrides `filters`.
        #[serde(default)]
        config: Option<PathBuf>,
    },
    Dedup {
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_ngram")]
        ngram: usize,
        #[serde(default)]
        group_by: Option<String>,
    },
    Pack {
        context_length: usize,
        #[serde(default = "default_strategy")]
        strategy: String,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_ngram() -> usize {
    DEFAULT_NGRAM
}

fn default_strategy() -> String {
    "paragraph".into()
}

impl StageSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StageSpec::Filter { .. } => "filter",
            StageSpec::Dedup { .. } => "dedup",
            StageSpec::Pack { .. } => "pack",
        }
    }
}

/// A stage with its parameters already checked.
#[derive(Debug, Clone)]
pub enum Stage {
    Filter(FilterPipeline),
    Dedup(DedupConfig),
    Pack(PackConfig),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Filter(_) => "filter",
            Stage::Dedup(_) => "dedup",
            Stage::Pack(_) => "pack",
        }
    }
}

pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub tokenizer_spec: String,
    pub tokenizer: Box<dyn Tokenizer>,
    pub stages: Vec<Stage>,
}

impl std::fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("input", &self.input)
            .field("output", &self.output)
            .field("seed", &self.seed)
            .field("tokenizer", &self.tokenizer_spec)
            .field("stages", &self.stages)
            .finish()
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&src, base)
    }

    /// Parse and fully validate a config. No corpus data is touched.
    pub fn from_toml(src: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(src).map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_owned() } else { base_dir.join(p) };
        if raw.stage.is_empty() {
            return Err(Error::Config("pipeline has no stages".into()));
        }
        let mut stages = Vec::with_capacity(raw.stage.len());
        for (i, spec) in raw.stage.iter().enumerate() {
            if i + 1 < raw.stage.len() && matches!(spec, StageSpec::Pack { .. }) {
                return Err(Error::Config(
                    "pack produces token examples and must be the last stage".into(),
                ));
            }
            stages.push(build_stage(spec, raw.seed, &resolve)?);
        }
        let tokenizer_spec = match raw.tokenizer.strip_prefix("external:") {
            Some(p) => format!("external:{}", resolve(Path::new(p)).display()),
            None => raw.tokenizer.clone(),
        };
        let tokenizer = tokenizer_from_spec(&tokenizer_spec).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("tokenizer: {io}")),
            other => other,
        })?;
        Ok(PipelineConfig {
            input: resolve(&raw.input),
            output: resolve(&raw.output),
            seed: raw.seed,
            tokenizer_spec,
            tokenizer,
            stages,
        })
    }
}

fn build_stage(spec: &StageSpec, seed: u64, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<Stage> {
    match spec {
        StageSpec::Filter {
            filters,
            profile,
            config,
        } => {
            let mut pipeline = match (config, filters) {
                (Some(path), _) => {
                    let path = resolve(path);
                    let src = fs::read_to_string(&path).map_err(|e| {
                        Error::Config(format!("filter config {}: {e}", path.display()))
                    })?;
                    FilterPipeline::from_toml(&src)?
                }
                (None, Some(names)) => FilterPipeline::parse_names(names)?,
                (None, None) => FilterPipeline::from_names(&FilterName::BASE),
            };
            if let Some(p) = profile {
                pipeline = pipeline.with_profile(p)?;
            }
            Ok(Stage::Filter(pipeline))
        }
        StageSpec::Dedup {
            threshold,
            ngram,
            group_by,
        } => {
            let cfg = DedupConfig {
                threshold: *threshold,
                ngram: *ngram,
                seed,
                group_by: group_by.clone(),
            };
            cfg.validate()?;
            Ok(Stage::Dedup(cfg))
        }
        StageSpec::Pack {
            context_length,
            strategy,
        } => {
            let strategy: UnitKind = strategy.parse()?;
            Ok(Stage::Pack(PackConfig::new(*context_length, strategy)?))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub output: PathBuf,
    pub report: PathBuf,
    pub records_in: usize,
    pub records_out: usize,
}

/// Read a whole line-record corpus.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path)?;
    RecordReader::new(BufReader::new(file)).collect()
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let mut w = RecordWriter::new(BufWriter::new(File::create(path)?));
    for d in docs {
        w.write(d)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Tracks files a run creates so a failed run can remove them.
struct Outputs {
    files: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
}

impl Outputs {
    fn cleanup(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if let Some(d) = &self.created_dir {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Execute the stages in order. Each stage reads the previous stage's
/// output; every stage writes its output and report.
pub fn run(cfg: &PipelineConfig) -> Result<Vec<StageSummary>> {
    let docs = read_corpus(&cfg.input)?;
    let created_dir = if cfg.output.is_dir() {
        None
    } else {
        fs::create_dir_all(&cfg.output)?;
        Some(cfg.output.clone())
    };
    let mut outputs = Outputs {
        files: Vec::new(),
        created_dir,
    };
    let result = run_stages(cfg, docs, &mut outputs);
    if result.is_err() {
        outputs.cleanup();
    }
    result
}

fn run_stages(cfg: &PipelineConfig, mut docs: Vec<Document>, outputs: &mut Outputs) -> Result<Vec<StageSummary>> {
    let mut summaries = Vec::new();
    for (i, stage) in cfg.stages.iter().enumerate() {
        let stem = format!("{:02}-{}", i + 1, stage.name());
        let out_path = cfg.output.join(format!("{stem}.jsonl"));
        let report_path = cfg.output.join(format!("{stem}.report.json"));
        let records_in = docs.len();
        outputs.files.push(out_path.clone());
        outputs.files.push(report_path.clone());

        let records_out = match stage {
            Stage::Filter(pipeline) => {
                let mut report = crate::filters::FilterReport::default();
                let mut kept = Vec::with_capacity(docs.len());
                for doc in &docs {
                    let (out, r) = pipeline.apply(doc);
                    if r.docs_out == 1 {
                        kept.push(out);
                    }
                    report.merge(&r);
                }
                docs = kept;
                write_corpus(&out_path, &docs)?;
                write_report(&report_path, &report)?;
                docs.len()
            }
            Stage::Dedup(dcfg) => {
                let (kept, report) = dedup_corpus(std::mem::take(&mut docs), dcfg)?;
                docs = kept;
                write_corpus(&out_path, &docs)?;
                write_report(&report_path, &report)?;
                docs.len()
            }
            Stage::Pack(pcfg) => {
                let tok = cfg.tokenizer.as_ref();
                let examples = pack_documents(&docs, pcfg, tok)?;
                let report = verify_pack(&examples, &docs, pcfg, tok);
                write_report(&report_path, &report)?;
                if !report.is_clean() {
                    return Err(Error::Contract(format!(
                        "packing produced {} invariant violations",
                        report.violations.len()
                    )));
                }
                let mut w = RecordWriter::new(BufWriter::new(File::create(&out_path)?));
                for e in &examples {
                    w.write_json(e)?;
                }
                w.finish()?.flush()?;
                examples.len()
            }
        };
        summaries.push(StageSummary {
            stage: stage.name().to_owned(),
            output: out_path,
            report: report_path,
            records_in,
            records_out,
        });
    }
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub corpus: String,
    pub tokens: u64,
    pub documents: u64,
    /// Share of all tokens across the compared corpora, in percent.
    pub percent: f64,
}

/// Count tokens and records in one corpus file. Packed records (with
/// `token_ids`) count their stored length; document records are tokenized.
pub fn corpus_counts(path: &Path, tok: &dyn Tokenizer) -> Result<(u64, u64)> {
    let file = File::open(path)?;
    let mut tokens = 0u64;
    let mut documents = 0u64;
    for (i, line) in std::io::BufRead::lines(BufReader::new(file)).enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse("<record>", e.to_string()).at_line(i + 1))?;
        if let Some(ids) = value.get("token_ids").and_then(|v| v.as_array()) {
            tokens += ids.len() as u64;
        } else {
            let doc = crate::document::parse_record(&line).map_err(|e| e.at_line(i + 1))?;
            tokens += tok.encode(&doc.text).len() as u64;
        }
        documents += 1;
    }
    Ok((tokens, documents))
}

pub fn stats(corpora: &[(String, PathBuf)], tok: &dyn Tokenizer) -> Result<Vec<CorpusStats>> {
    let mut rows = Vec::with_capacity(corpora.len());
    for (name, path) in corpora {
        let (tokens, documents) = corpus_counts(path, tok)?;
        rows.push(CorpusStats {
            corpus: name.clone(),
            tokens,
            documents,
            percent: 0.0,
        });
    }
    let total: u64 = rows.iter().map(|r| r.tokens).sum();
    if total > 0 {
        for r in &mut rows {
            r.percent = 100.0 * r.tokens as f64 / total as f64;
        }
    }
    Ok(rows)
}

fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Corpus, Number of tokens, Number of documents, Total percentage, then a
/// Total row.
pub fn render_stats(rows: &[CorpusStats]) -> String {
    let width = rows.iter().map(|r| r.corpus.chars().count()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>18}  {:>19}  {:>16}",
        "Corpus", "Number of tokens", "Number of documents", "Total percentage"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>18}  {:>19}  {:>14.1} %",
            r.corpus,
            thousands(r.tokens),
            thousands(r.documents),
            r.percent
        );
    }
    let _ = writeln!(
        s,
        "{:<width$}  {:>18}  {:>19}",
        "Total",
        thousands(rows.iter().map(|r| r.tokens).sum()),
        thousands(rows.iter().map(|r| r.documents).sum())
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::ByteTokenizer;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn unknown_stage_rejected() {
        let err = PipelineConfig::from_toml(
            "input = \"in.jsonl\"\noutput = \"out\"\n[[stage]]\nname = \"foo\"\n",
            Path::new("."),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1, "{err}");
    }

    #[test]
    fn bad_params_rejected() {
        for stage in [
            "name = \"dedup\"\nthreshold = 1.5",
            "name = \"pack\"\ncontext_length = 2",
            "name = \"filter\"\nfilters = [\"nope\"]",
            "name = \"dedup\"\nbogus = 1",
        ] {
            let src = format!("input = \"a\"\noutput = \"b\"\n[[stage]]\n{stage}\n");
            let err = PipelineConfig::from_toml(&src, Path::new(".")).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{stage}: {err}");
        }
        let src = "input = \"a\"\noutput = \"b\"\n[[stage]]\nname = \"pack\"\ncontext_length = 64\n[[stage]]\nname = \"dedup\"\n";
        assert!(PipelineConfig::from_toml(src, Path::new(".")).is_err());
    }

    #[test]
    fn stats_percentages() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.jsonl", &format!("{{\"id\":\"1\",\"text\":\"{}\"}}\n", "x".repeat(90)));
        let b = write(dir.path(), "b.jsonl", &format!("{{\"id\":\"2\",\"text\":\"{}\"}}\n", "y".repeat(10)));
        let e = write(dir.path(), "e.jsonl", "");
        let rows = stats(
            &[("A".into(), a), ("B".into(), b), ("E".into(), e)],
            &ByteTokenizer,
        )
        .unwrap();
        assert_eq!(rows[0].tokens, 90);
        assert!((rows[0].percent - 90.0).abs() < 1e-12);
        assert!((rows[1].percent - 10.0).abs() < 1e-12);
        assert_eq!((rows[2].tokens, rows[2].documents), (0, 0));
        let table = render_stats(&rows);
        assert!(table.contains("90.0 %"), "{table}");
    }

    #[test]
    fn packed_stats_count_context() {
        let dir = tempfile::tempdir().unwrap();
        let line = format!("{{\"token_ids\":{:?},\"content_len\":2,\"members\":[]}}\n", vec![1u32; 128]);
        let p = write(dir.path(), "p.jsonl", &line.repeat(3));
        let (tokens, docs) = corpus_counts(&p, &ByteTokenizer).unwrap();
        assert_eq!((tokens, docs), (384, 3));
        assert!(corpus_counts(&dir.path().join("missing"), &ByteTokenizer)
            .is_err_and(|e| e.exit_code() == 3));
    }

    #[test]
    fn thousands_separators() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(12_795_707_392), "12,795,707,392");
    }
}
