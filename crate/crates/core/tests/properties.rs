use std::collections::BTreeMap;

use proptest::prelude::*;

use corpusprep::align::{interleave_paragraphs, ParallelPair};
use corpusprep::document::{parse_record, serialize_record, split_units};
use corpusprep::evalmetrics::{self, EvalConfig, TranslationPair};
use corpusprep::filters::{FilterName, FilterPipeline, FilterStep};
use corpusprep::leaderboard::{self, rank_row, Outcome, ScoreMatrix, TieRule, VoteRecord};
use corpusprep::packer::{self, PackConfig};
use corpusprep::pagemerge::{self, HeuristicProvider, Page};
use corpusprep::text::Paragraphs;
use corpusprep::{ByteTokenizer, Document, UnitKind};

fn document() -> impl Strategy<Value = Document> {
    (
        "[a-zA-Z0-9_-]{1,12}",
        "(\\PC|[\n\t\r\u{0}\u{7}\"\\\\])*",
        prop_oneof![Just(String::new()), "[a-z]{2}"],
        prop::collection::btree_map("[a-z]{1,6}", "\\PC{0,10}", 0..4),
    )
        .prop_map(|(id, text, lang, meta)| Document {
            id,
            text,
            lang,
            meta,
        })
}

fn structured_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zčšž]{1,8}",
            "[A-ZČŠŽ][a-z]{0,6}",
            Just(". ".to_owned()),
            Just("? ".to_owned()),
            Just(" ".to_owned()),
            Just("\n".to_owned()),
            Just("\n\n".to_owned()),
            Just("\n \n\n".to_owned()),
            Just("# ".to_owned()),
            Just("```\n".to_owned()),
            Just("Dr. ".to_owned()),
        ],
        0..60,
    )
    .prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn record_round_trip(doc in document()) {
        let line = serialize_record(&doc).unwrap();
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(parse_record(&line).unwrap(), doc);
    }

    #[test]
    fn units_reconstruct_document(text in structured_text()) {
        let doc = Document::new("d", text.clone());
        for kind in [UnitKind::Sentence, UnitKind::Paragraph, UnitKind::Section] {
            let units = split_units(&doc, kind);
            let rebuilt: String = units.iter().map(|u| u.full_text()).collect();
            prop_assert_eq!(&rebuilt, &text, "{:?}", kind);
            prop_assert!(units.iter().enumerate().all(|(i, u)| u.ordinal == i));
        }
    }

    #[test]
    fn filters_idempotent(text in "([aAcCsSzZčšž \n]|ˇ|\u{30c}|Ã¨|Ä\u{8d}|Å¡|!\\[x\\]\\(y\\)|\\n\\n\\n|\\PC)*") {
        for name in FilterName::ALL {
            let step = FilterStep::with_defaults(name);
            let (once, _) = step.apply(&text);
            let (twice, _) = step.apply(&once);
            prop_assert_eq!(once, twice, "{}", name);
        }
        let p = FilterPipeline::default_profile(true);
        let (once, _) = p.apply(&Document::new("x", text));
        let (twice, _) = p.apply(&once);
        prop_assert_eq!(once.text, twice.text);
    }

    #[test]
    fn packing_conserves_tokens(
        texts in prop::collection::vec(structured_text(), 0..6),
        ctx in prop::sample::select(vec![8usize, 12, 16, 33, 64]),
        kind in prop::sample::select(vec![UnitKind::Sentence, UnitKind::Paragraph, UnitKind::Section]),
    ) {
        let docs: Vec<Document> = texts.into_iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), t)).collect();
        let cfg = PackConfig::new(ctx, kind).unwrap();
        let tok = ByteTokenizer;
        let examples = packer::pack_documents(&docs, &cfg, &tok).unwrap();
        let report = packer::verify_pack(&examples, &docs, &cfg, &tok);
        prop_assert!(report.is_clean(), "{:?}", report.violations);
        prop_assert!(examples.iter().all(|e| e.token_ids.len() == ctx));
    }

    #[test]
    fn elo_is_zero_sum(votes in prop::collection::vec((0usize..6, 1usize..6, 0usize..4), 0..300), k in 1.0f64..64.0) {
        let outcomes = [Outcome::AWins, Outcome::BWins, Outcome::Tie, Outcome::BothBad];
        let votes: Vec<VoteRecord> = votes
            .into_iter()
            .map(|(a, d, o)| VoteRecord::new(format!("m{a}"), format!("m{}", (a + d) % 6), outcomes[o]))
            .collect();
        let (rows, table) = leaderboard::compute_leaderboard(&votes, k, 1500.0).unwrap();
        let sum: f64 = table.ratings.values().sum();
        prop_assert!((sum - 1500.0 * table.ratings.len() as f64).abs() < 1e-6);
        for r in &rows {
            prop_assert!(r.win_rate.is_none_or(|w| (0.0..=1.0).contains(&w)));
            let c = table.counts[&r.model];
            prop_assert_eq!(c.total(), r.total_votes);
        }
    }

    #[test]
    fn ranking_ignores_monotone_rescaling(
        rows in prop::collection::vec(prop::collection::vec(0u8..20, 5), 1..8),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let models: Vec<String> = (0..5).map(|i| format!("m{i}")).collect();
        let benches: Vec<(String, String)> = (0..rows.len()).map(|i| (format!("b{i}"), String::new())).collect();
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
        let scaled: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().map(|v| (v * scale + shift).powi(3)).collect()).collect();
        let a = leaderboard::average_rank(&ScoreMatrix::new(benches.clone(), models.clone(), raw.clone()).unwrap(), TieRule::Fractional).unwrap();
        let b = leaderboard::average_rank(&ScoreMatrix::new(benches, models, scaled).unwrap(), TieRule::Fractional).unwrap();
        prop_assert_eq!(a, b);
        for r in &raw {
            let sum: f64 = rank_row(r, TieRule::Fractional).iter().sum();
            prop_assert_eq!(sum, 15.0);
        }
    }

    #[test]
    fn interleave_alternates(src in prop::collection::vec("[a-z ]{1,10}[a-z]", 1..6), tgt_words in prop::collection::vec("[a-z]{1,10}", 6)) {
        let tgt: Vec<String> = tgt_words[..src.len()].to_vec();
        let pair = ParallelPair::new(
            "p",
            Document::new("s", src.join("\n\n")).with_lang("en"),
            Document::new("t", tgt.join("\n\n")).with_lang("sl"),
        ).unwrap();
        let doc = interleave_paragraphs(&pair).unwrap();
        let parts = Paragraphs::split(&doc.text).parts;
        prop_assert_eq!(parts.len(), 2 * src.len());
        for (i, p) in parts.iter().enumerate() {
            let expected = if i % 2 == 0 { &src[i / 2] } else { &tgt[i / 2] };
            prop_assert_eq!(*p, expected.as_str());
        }
    }

    #[test]
    fn merged_text_is_subsequence_of_pages(
        pages in prop::collection::vec(
            prop::collection::vec(prop_oneof![
                "[a-zčš]{1,9}", "[A-Z][a-z]{1,6}", Just("-".to_owned()), Just(".".to_owned()),
                Just(" ".to_owned()), Just("\n\n".to_owned()), Just("\n\n12".to_owned()), Just("Stran 4\n\n".to_owned()),
            ], 0..25).prop_map(|v| v.concat()),
            1..5,
        )
    ) {
        let pages: Vec<Page> = pages.iter().enumerate().map(|(i, t)| Page::new(i, t.clone())).collect();
        let out = pagemerge::merge_pages("d", &pages, &HeuristicProvider).unwrap();
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<Vec<char>>();
        let merged = strip(&out.document.text);
        let all = strip(&pages.iter().map(|p| p.text.as_str()).collect::<String>());
        let mut it = all.iter();
        prop_assert!(merged.iter().all(|c| it.any(|x| x == c)), "{:?}", out.document.text);
        let content: Vec<&Page> = pages.iter().filter(|p| !out.boilerplate_pages.contains(&p.index)).collect();
        if content.len() == 1 {
            prop_assert_eq!(&out.document.text, &content[0].text);
        }
    }

    #[test]
    fn truncation_monotone(orig in 1usize..400, a in 0usize..600, b in 0usize..600) {
        let (lo, hi) = (a.min(b), a.max(b));
        let p = |n: usize| TranslationPair::new("x", "o".repeat(orig), "t".repeat(n));
        if evalmetrics::truncation_flag(&p(hi)).unwrap() {
            prop_assert!(evalmetrics::truncation_flag(&p(lo)).unwrap());
        }
    }

    #[test]
    fn eval_rates_ignore_order(
        spec in prop::collection::vec((1usize..50, 0usize..80, 0usize..3, 0.0f64..1.0), 1..30),
        seed in any::<u64>(),
    ) {
        let pairs: Vec<TranslationPair> = spec
            .iter()
            .enumerate()
            .map(|(i, &(o, t, ds, score))| TranslationPair {
                dataset: format!("ds{ds}"),
                external_scores: BTreeMap::from([("comet".to_owned(), score)]),
                ..TranslationPair::new(format!("p{i}"), "o".repeat(o), "t".repeat(t))
            })
            .collect();
        let mut shuffled = pairs.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed as usize).wrapping_mul(i + 7) % n;
            shuffled.swap(i, j);
        }
        let a = evalmetrics::eval_translations(&pairs, &EvalConfig::default()).unwrap();
        let b = evalmetrics::eval_translations(&shuffled, &EvalConfig::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[derive(Debug, Clone)]
enum Block {
    Heading(u8, String),
    Para(String),
    Link(String, String),
    List(bool, usize),
    Fence(String),
    Quote(String),
    Table(usize, usize),
    Rule,
}

fn render(blocks: &[Block]) -> String {
    blocks
        .iter()
        .map(|b| match b {
            Block::Heading(l, t) => format!("{} {t}", "#".repeat(*l as usize)),
            Block::Para(t) => t.clone(),
            Block::Link(t, url) => format!("{t} [here]({url}) {t}"),
            Block::List(ordered, n) => (1..=*n)
                .map(|i| if *ordered { format!("{i}. item") } else { "- item".to_owned() })
                .collect::<Vec<_>>()
                .join("\n"),
            Block::Fence(lang) => format!("```{lang}\ncode here\n```"),
            Block::Quote(t) => format!("> {t}"),
            Block::Table(r, c) => {
                let row = format!("|{}", " x |".repeat(*c));
                let sep = format!("|{}", "---|".repeat(*c));
                let mut lines = vec![row.clone(), sep];
                lines.extend(std::iter::repeat_n(row, *r));
                lines.join("\n")
            }
            Block::Rule => "---".to_owned(),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn block() -> impl Strategy<Value = Block> {
    let words = "[a-z]{1,8}( [a-z]{1,8}){0,6}";
    prop_oneof![
        (1u8..=6, words).prop_map(|(l, t)| Block::Heading(l, t)),
        words.prop_map(Block::Para),
        (words, "https://[a-z]{1,8}\\.si/[a-z]{0,5}").prop_map(|(t, u)| Block::Link(t, u)),
        (any::<bool>(), 1usize..6).prop_map(|(o, n)| Block::List(o, n)),
        prop::sample::select(vec!["", "python", "rust", "bash"]).prop_map(|l| Block::Fence(l.to_owned())),
        words.prop_map(Block::Quote),
        (1usize..4, 1usize..4).prop_map(|(r, c)| Block::Table(r, c)),
        Just(Block::Rule),
    ]
}

#[derive(Debug, Clone, Copy)]
enum Mutation {
    DropHeadingMarker,
    ChangeFenceLanguage,
    AddListItem,
    AlterUrl,
}

/// Apply one mutation to the first block of the matching kind, appending
/// such a block to both versions if none exists.
fn mutate(mut blocks: Vec<Block>, m: Mutation) -> (Vec<Block>, Vec<Block>) {
    let matches = |b: &Block| match m {
        Mutation::DropHeadingMarker => matches!(b, Block::Heading(..)),
        Mutation::ChangeFenceLanguage => matches!(b, Block::Fence(_)),
        Mutation::AddListItem => matches!(b, Block::List(..)),
        Mutation::AlterUrl => matches!(b, Block::Link(..)),
    };
    if !blocks.iter().any(matches) {
        blocks.push(match m {
            Mutation::DropHeadingMarker => Block::Heading(2, "title".into()),
            Mutation::ChangeFenceLanguage => Block::Fence("python".into()),
            Mutation::AddListItem => Block::List(false, 2),
            Mutation::AlterUrl => Block::Link("see".into(), "https://a.si/".into()),
        });
    }
    let mut mutated = blocks.clone();
    let i = mutated.iter().position(matches).unwrap();
    mutated[i] = match &mutated[i] {
        Block::Heading(_, t) => Block::Para(t.clone()),
        Block::Fence(lang) => Block::Fence(if lang == "go" { "java".into() } else { "go".into() }),
        Block::List(o, n) => Block::List(*o, n + 1),
        Block::Link(t, u) => Block::Link(t.clone(), format!("{u}x")),
        other => other.clone(),
    };
    (blocks, mutated)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn markdown_identity_good_and_mutation_bad(
        blocks in prop::collection::vec(block(), 0..8),
        m in prop::sample::select(vec![
            Mutation::DropHeadingMarker, Mutation::ChangeFenceLanguage, Mutation::AddListItem, Mutation::AlterUrl,
        ]),
    ) {
        let (orig, mutated) = mutate(blocks, m);
        let (a, b) = (render(&orig), render(&mutated));
        prop_assert!(evalmetrics::markdown_match(&a, &a).is_good());
        let v = evalmetrics::markdown_match(&a, &b);
        prop_assert!(!v.is_good(), "{:?} not detected:\n{}\n---\n{}", m, a, b);
        prop_assert!(!v.mismatches.is_empty());
    }
}
