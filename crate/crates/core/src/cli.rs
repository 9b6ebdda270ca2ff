//! The `corpusprep` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 data
//! error, 3 I/O error. Reports go to `--report <file>` when given, otherwise
//! to stderr as JSON.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignMode, Order, ParallelPair};
use crate::dedup::{DedupConfig, Deduplicator, DEFAULT_NGRAM, DEFAULT_THRESHOLD};
use crate::document::{read_json_lines, Document, RecordReader, RecordWriter, UnitKind};
use crate::error::{Error, Result};
use crate::evalmetrics::{self, EvalConfig, LanguageDetector, StopwordDetector, TranslationPair};
use crate::filters::{FilterName, FilterPipeline, FilterReport};
use crate::leaderboard::{self, ScoreMatrix, TieRule, VoteRecord, DEFAULT_INITIAL, DEFAULT_K};
use crate::packer::{pack_documents, verify_pack, PackConfig};
use crate::pagemerge::{self, HeuristicProvider, MergeProvider, Page, ReplayProvider, ReplayRecord};
use crate::pipeline::{self, PipelineConfig};
use crate::tokenizer::tokenizer_from_spec;

#[derive(Debug, Parser)]
#[command(name = "corpusprep", version, about = "Corpus preparation and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean documents with the text filters.
    Filter {
        /// Line-record corpus, `-` for stdin.
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Comma-separated filter names (default: the four base filters).
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
        /// Append a profile's filters, e.g. `nanonets`.
        #[arg(long)]
        profile: Option<String>,
        /// TOML filter configuration; overrides `--filters`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Remove near-duplicate documents with MinHash LSH.
    Dedup {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_NGRAM)]
        ngram: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deduplicate within groups sharing this metadata key.
        #[arg(long)]
        group_by: Option<String>,
        /// Report including every removed (kept, removed, estimate) pair.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pack documents into fixed-length token examples.
    Pack {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        context_length: usize,
        /// Split unit for oversized documents: sentence, paragraph or section.
        #[arg(long, default_value = "paragraph")]
        strategy: String,
        /// `reference` or `external:<vocab.json>`.
        #[arg(long, default_value = "reference")]
        tokenizer: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build parallel training documents from source/target pairs.
    Align {
        /// Records `{pair_id, src, tgt}` with documents as `src`/`tgt`.
        #[arg(long, conflicts_with_all = ["src", "tgt"])]
        pairs: Option<PathBuf>,
        /// Source documents, joined to `--tgt` on `meta.pair_id` or id.
        #[arg(long, requires = "tgt")]
        src: Option<PathBuf>,
        #[arg(long, requires = "src")]
        tgt: Option<PathBuf>,
        /// paragraph, document or separate.
        #[arg(long)]
        mode: String,
        /// src_first or tgt_first (document mode).
        #[arg(long, default_value = "src_first")]
        order: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Stitch OCR pages into documents.
    MergePages {
        /// One record per page: `{doc_id, page_index, text}`.
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// heuristic or replay.
        #[arg(long, default_value = "heuristic")]
        provider: String,
        /// Decision records for the replay provider.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Per-boundary decision log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score translations: truncation, markdown format and language errors.
    EvalTranslation {
        /// Records `{id, original, translated, dataset?, external_scores?}`.
        input: PathBuf,
        /// Extra per-pair scores, records `{id, <metric>: value, ...}`.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Enable the language error rate with this detector (`stopword`).
        #[arg(long)]
        lang_detector: Option<String>,
        #[arg(long, default_value = "sl")]
        target_lang: String,
        /// JSON report with per-pair flags.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// ELO leaderboard from an arena vote log.
    Leaderboard {
        /// Records `{model_a, model_b, outcome, timestamp}`.
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: f64,
        #[arg(long, default_value_t = DEFAULT_INITIAL)]
        initial: f64,
        #[arg(long)]
        json: bool,
    },
    /// Average-rank leaderboard from a benchmark score matrix.
    Rank {
        /// CSV with header `benchmark,metric,<model>...`.
        input: PathBuf,
        /// fractional or competition.
        #[arg(long, default_value = "fractional")]
        tie_rule: String,
        #[arg(long)]
        json: bool,
    },
    /// Token and document counts per corpus.
    Stats {
        /// `NAME=PATH` or `PATH` (named by file stem).
        #[arg(required = true)]
        corpora: Vec<String>,
        #[arg(long, default_value = "reference")]
        tokenizer: String,
        #[arg(long)]
        json: bool,
    },
    /// Run a configured multi-stage pipeline.
    Run { config: PathBuf },
}

/// Parse arguments and run, returning the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => body(stdout),
    }
}

fn emit_report<T: Serialize>(path: Option<&Path>, report: &T, stderr: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => pipeline::write_report(p, report),
        None => {
            let s = serde_json::to_string(report).map_err(|e| Error::Serialize(e.to_string()))?;
            writeln!(stderr, "{s}")?;
            Ok(())
        }
    }
}

fn print_json<T: Serialize>(value: &T, stdout: &mut dyn Write) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    writeln!(stdout, "{s}")?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AlignFailure {
    pair_id: String,
    error: String,
}

#[derive(Debug, Default, Serialize)]
struct AlignReport {
    pairs_in: usize,
    documents_out: usize,
    failures: Vec<AlignFailure>,
    unmatched: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct PageRecord {
    doc_id: String,
    page_index: usize,
    text: String,
}

#[derive(Debug, Serialize)]
struct LoggedDecision<'a> {
    doc_id: &'a str,
    #[serde(flatten)]
    entry: &'a pagemerge::MergeLogEntry,
}

#[derive(Debug, Serialize)]
struct MergeSummary {
    doc_id: String,
    boilerplate_pages: Vec<usize>,
    empty: bool,
}

#[derive(Debug, Deserialize)]
struct ScoreRecord {
    id: String,
    #[serde(flatten)]
    scores: BTreeMap<String, f64>,
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Filter {
            input,
            output,
            filters,
            profile,
            config,
            report,
        } => {
            let mut pipeline = match (&config, &filters) {
                (Some(path), _) => FilterPipeline::from_toml(&std::fs::read_to_string(path).map_err(
                    |e| Error::Config(format!("filter config {}: {e}", path.display())),
                )?)?,
                (None, Some(names)) => FilterPipeline::parse_names(names)?,
                (None, None) => FilterPipeline::from_names(&FilterName::BASE),
            };
            if let Some(p) = &profile {
                pipeline = pipeline.with_profile(p)?;
            }
            let mut total = FilterReport::default();
            with_output(output.as_deref(), stdout, |out| {
                let mut w = RecordWriter::new(out);
                for doc in RecordReader::new(open_input(&input)?) {
                    let (doc, r) = pipeline.apply(&doc?);
                    if r.docs_out == 1 {
                        w.write(&doc)?;
                    }
                    total.merge(&r);
                }
                w.finish()?;
                Ok(())
            })?;
            emit_report(report.as_deref(), &total, stderr)
        }

        Command::Dedup {
            input,
            output,
            threshold,
            ngram,
            seed,
            group_by,
            report,
        } => {
            let mut dd = Deduplicator::new(DedupConfig {
                threshold,
                ngram,
                seed,
                group_by,
            })?;
            with_output(output.as_deref(), stdout, |out| {
                let mut w = RecordWriter::new(out);
                for doc in RecordReader::new(open_input(&input)?) {
                    let doc = doc?;
                    if dd.offer(&doc)? {
                        w.write(&doc)?;
                    }
                }
                w.finish()?;
                Ok(())
            })?;
            emit_report(report.as_deref(), &dd.finish(), stderr)
        }

        Command::Pack {
            input,
            output,
            context_length,
            strategy,
            tokenizer,
            report,
        } => {
            let strategy: UnitKind = strategy.parse()?;
            let cfg = PackConfig::new(context_length, strategy)?;
            let tok = tokenizer_from_spec(&tokenizer)?;
            let docs: Vec<Document> = RecordReader::new(open_input(&input)?).collect::<Result<_>>()?;
            let examples = pack_documents(&docs, &cfg, tok.as_ref())?;
            let rep = verify_pack(&examples, &docs, &cfg, tok.as_ref());
            if !rep.is_clean() {
                emit_report(report.as_deref(), &rep, stderr)?;
                return Err(Error::Contract(format!(
                    "{} packing invariant violations",
                    rep.violations.len()
                )));
            }
            with_output(output.as_deref(), stdout, |out| {
                let mut w = RecordWriter::new(out);
                for e in &examples {
                    w.write_json(e)?;
                }
                w.finish()?;
                Ok(())
            })?;
            emit_report(report.as_deref(), &rep, stderr)
        }

        Command::Align {
            pairs,
            src,
            tgt,
            mode,
            order,
            output,
            report,
        } => {
            let mode: AlignMode = mode.parse()?;
            let order: Order = order.parse()?;
            let mut rep = AlignReport::default();
            let pairs: Vec<ParallelPair> = match (pairs, src, tgt) {
                (Some(p), _, _) => read_json_lines(open_input(&p)?)?,
                (None, Some(s), Some(t)) => {
                    let s = RecordReader::new(open_input(&s)?).collect::<Result<Vec<_>>>()?;
                    let t = RecordReader::new(open_input(&t)?).collect::<Result<Vec<_>>>()?;
                    let (pairs, unmatched) = align::join_on_pair_id(s, t);
                    rep.unmatched = unmatched;
                    pairs
                }
                _ => return Err(Error::Config("align needs --pairs or both --src and --tgt".into())),
            };
            rep.pairs_in = pairs.len();
            with_output(output.as_deref(), stdout, |out| {
                let mut w = RecordWriter::new(out);
                for pair in &pairs {
                    let docs = pair.validate().and_then(|()| match mode {
                        AlignMode::Paragraph => align::interleave_paragraphs(pair).map(|d| vec![d]),
                        AlignMode::Document => Ok(vec![align::concat_documents(pair, order)]),
                        AlignMode::Separate => {
                            let (s, t) = align::emit_separate(pair);
                            Ok(vec![s, t])
                        }
                    });
                    match docs {
                        Ok(docs) => {
                            for d in &docs {
                                w.write(d)?;
                            }
                            rep.documents_out += docs.len();
                        }
                        Err(e @ (Error::Alignment { .. } | Error::Validation(_))) => {
                            rep.failures.push(AlignFailure {
                                pair_id: pair.pair_id.clone(),
                                error: e.to_string(),
                            })
                        }
                        Err(e) => return Err(e),
                    }
                }
                w.finish()?;
                Ok(())
            })?;
            emit_report(report.as_deref(), &rep, stderr)
        }

        Command::MergePages {
            input,
            output,
            provider,
            replay,
            log,
        } => {
            let provider: Box<dyn MergeProvider> = match (provider.as_str(), replay) {
                ("heuristic", None) => Box::new(HeuristicProvider),
                ("heuristic", Some(_)) => {
                    return Err(Error::Config("--replay requires --provider replay".into()))
                }
                ("replay", Some(path)) => {
                    let records: Vec<ReplayRecord> = read_json_lines(open_input(&path)?)?;
                    Box::new(ReplayProvider::from_records(records)?)
                }
                ("replay", None) => return Err(Error::Config("--provider replay needs --replay <file>".into())),
                (other, _) => return Err(Error::Config(format!("unknown merge provider {other:?}"))),
            };
            // Documents in order of first appearance, pages sorted by index.
            let records: Vec<PageRecord> = read_json_lines(open_input(&input)?)?;
            let mut docs: Vec<(String, Vec<Page>)> = Vec::new();
            let mut slot: BTreeMap<String, usize> = BTreeMap::new();
            for r in records {
                let i = *slot.entry(r.doc_id.clone()).or_insert_with(|| {
                    docs.push((r.doc_id.clone(), Vec::new()));
                    docs.len() - 1
                });
                docs[i].1.push(Page::new(r.page_index, r.text));
            }
            let mut outcomes = Vec::with_capacity(docs.len());
            for (doc_id, pages) in &mut docs {
                pages.sort_by_key(|p| p.index);
                outcomes.push(pagemerge::merge_pages(doc_id, pages, provider.as_ref())?);
            }
            with_output(output.as_deref(), stdout, |out| {
                let mut w = RecordWriter::new(out);
                for o in outcomes.iter().filter(|o| !o.empty) {
                    w.write(&o.document)?;
                }
                w.finish()?;
                Ok(())
            })?;
            if let Some(path) = log {
                let mut w = RecordWriter::new(BufWriter::new(File::create(path)?));
                for o in &outcomes {
                    for entry in &o.log {
                        w.write_json(&LoggedDecision {
                            doc_id: &o.document.id,
                            entry,
                        })?;
                    }
                }
                w.finish()?.flush()?;
            }
            let summary: Vec<MergeSummary> = outcomes
                .iter()
                .filter(|o| o.empty || !o.boilerplate_pages.is_empty())
                .map(|o| MergeSummary {
                    doc_id: o.document.id.clone(),
                    boilerplate_pages: o.boilerplate_pages.clone(),
                    empty: o.empty,
                })
                .collect();
            emit_report(None, &summary, stderr)
        }

        Command::EvalTranslation {
            input,
            scores,
            lang_detector,
            target_lang,
            report,
        } => {
            let detector: Option<Box<dyn LanguageDetector>> = match lang_detector.as_deref() {
                None => None,
                Some("stopword") => Some(Box::new(StopwordDetector)),
                Some(other) => return Err(Error::Config(format!("unknown language detector {other:?}"))),
            };
            let mut pairs: Vec<TranslationPair> = read_json_lines(open_input(&input)?)?;
            if let Some(path) = scores {
                let records: Vec<ScoreRecord> = read_json_lines(open_input(&path)?)?;
                let mut by_id: BTreeMap<String, BTreeMap<String, f64>> =
                    records.into_iter().map(|r| (r.id, r.scores)).collect();
                for p in &mut pairs {
                    if let Some(s) = by_id.remove(&p.id) {
                        p.external_scores.extend(s);
                    }
                }
                if let Some(id) = by_id.keys().next() {
                    return Err(Error::Validation(format!("scores given for unknown pair {id:?}")));
                }
            }
            let cfg = EvalConfig {
                language: detector.is_some(),
                detector: detector.as_deref(),
                target_lang,
                ..EvalConfig::default()
            };
            let rep = evalmetrics::eval_translations(&pairs, &cfg)?;
            write!(stdout, "{}", evalmetrics::render_report(&rep))?;
            if let Some(p) = report {
                pipeline::write_report(&p, &rep)?;
            }
            Ok(())
        }

        Command::Leaderboard {
            input,
            k,
            initial,
            json,
        } => {
            let votes: Vec<VoteRecord> = read_json_lines(open_input(&input)?)?;
            let (rows, _) = leaderboard::compute_leaderboard(&votes, k, initial)?;
            if json {
                print_json(&rows, stdout)
            } else {
                write!(stdout, "{}", leaderboard::render_leaderboard(&rows))?;
                Ok(())
            }
        }

        Command::Rank { input, tie_rule, json } => {
            let rule: TieRule = tie_rule.parse()?;
            let matrix = ScoreMatrix::from_csv(open_input(&input)?)?;
            let rows = leaderboard::average_rank(&matrix, rule)?;
            if json {
                print_json(&rows, stdout)
            } else {
                write!(stdout, "{}", leaderboard::render_ranking(&rows))?;
                Ok(())
            }
        }

        Command::Stats {
            corpora,
            tokenizer,
            json,
        } => {
            let tok = tokenizer_from_spec(&tokenizer)?;
            let named: Vec<(String, PathBuf)> = corpora
                .iter()
                .map(|c| match c.split_once('=') {
                    Some((name, path)) => (name.to_owned(), PathBuf::from(path)),
                    None => {
                        let p = PathBuf::from(c);
                        let name = p.file_stem().map_or_else(|| c.clone(), |s| s.to_string_lossy().into_owned());
                        (name, p)
                    }
                })
                .collect();
            let rows = pipeline::stats(&named, tok.as_ref())?;
            if json {
                print_json(&rows, stdout)
            } else {
                write!(stdout, "{}", pipeline::render_stats(&rows))?;
                Ok(())
            }
        }

        Command::Run { config } => {
            let cfg = PipelineConfig::from_file(&config).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("{}: {io}", config.display())),
                other => other,
            })?;
            let summaries = pipeline::run(&cfg)?;
            print_json(&summaries, stdout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with(std::iter::once("corpusprep").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_and_bad_args() {
        assert_eq!(run(&["--help"]).0, 0);
        assert_eq!(run(&["frobnicate"]).0, 1);
        assert_eq!(run(&["rank", "x.csv", "--tie-rule", "dense"]).0, 1);
    }

    #[test]
    fn missing_input_is_io_error() {
        let (code, _, err) = run(&["leaderboard", "/nonexistent/votes.jsonl"]);
        assert_eq!(code, 3, "{err}");
    }
}
