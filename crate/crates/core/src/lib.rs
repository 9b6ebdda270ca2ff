//! Corpus preparation and evaluation toolkit for adapting a large language
//! model to a less-resourced language.
//!
//! The crate is organised as one module per pipeline stage:
//!
//! - [`document`]: the [`Document`] record, line-record I/O and unit splitting
//! - [`tokenizer`]: the [`Tokenizer`] abstraction and a byte-level reference tokenizer
//! - [`filters`]: text cleaning filters and the filter pipeline runner
//! - [`dedup`]: MinHash LSH near-duplicate removal and ROUGE-L novelty filtering
//! - [`packer`]: splitting, merging and first-fit-decreasing packing into fixed-length examples
//! - [`align`]: paragraph-, document- and separate-level parallel corpus construction
//! - [`pagemerge`]: OCR page classification and page stitching
//! - [`evalmetrics`]: translation quality checks and the markdown structure judge
//! - [`leaderboard`]: ELO arena scoring and average-rank leaderboards
//! - [`pipeline`]: configured multi-stage runs and corpus statistics
//!
//! The `corpusprep` binary exposes all of these as subcommands; see [`cli`].

pub mod align;
pub mod cli;
pub mod dedup;
pub mod document;
pub mod error;
pub mod evalmetrics;
pub mod filters;
pub mod leaderboard;
pub mod packer;
pub mod pagemerge;
pub mod pipeline;
pub mod text;
pub mod tokenizer;

pub use document::{Document, Unit, UnitKind};
pub use error::{Error, Result};
pub use tokenizer::{ByteTokenizer, Tokenizer};
