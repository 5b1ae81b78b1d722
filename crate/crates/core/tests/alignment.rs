mod common;

use fluentcrit::alignment::{
    build_alignment, build_alignment_with, parse_textgrid, serialize_textgrid, AlignmentOptions,
    AlignmentTable, Interval, IntervalTier, TextGridDoc,
};
use fluentcrit::spectral::MelConfig;
use fluentcrit::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

fn frames_for(doc: &TextGridDoc, cfg: &MelConfig) -> usize {
    cfg.frames_for_samples((doc.xmax * cfg.sample_rate_hz as f64).round() as usize)
}

fn check_invariants(table: &AlignmentTable) {
    let silent = table.frame_to_word().iter().filter(|w| w.is_none()).count();
    assert_eq!(table.phoneme_durations().iter().sum::<usize>() + silent, table.n_frames());
    for (w, &d) in table.word_durations().iter().enumerate() {
        let from_phonemes: usize = table
            .phoneme_to_word()
            .iter()
            .zip(table.phoneme_durations())
            .filter(|(pw, _)| **pw == w)
            .map(|(_, d)| d)
            .sum();
        assert_eq!(d, from_phonemes);
        assert!(d >= 1);
    }
    for (f, p) in table.frame_to_phoneme().iter().enumerate() {
        match p {
            Some(p) => assert_eq!(Some(table.phoneme_to_word()[*p]), table.frame_to_word()[f]),
            None => assert_eq!(table.frame_to_word()[f], None),
        }
    }
    for labels in [table.frame_to_phoneme(), table.frame_to_word()] {
        let seq: Vec<usize> = labels.iter().flatten().copied().collect();
        assert!(seq.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn hi_fixture_parses_field_by_field() {
    let doc = parse_textgrid(&fixture("hi.TextGrid")).unwrap();
    assert_eq!((doc.xmin, doc.xmax), (0.0, 0.5));
    assert_eq!(doc.tiers.len(), 2);
    let words = doc.tier("words").unwrap();
    assert_eq!(words.intervals, vec![Interval { xmin: 0.0, xmax: 0.5, label: "hi".into() }]);
    let phones = doc.tier("phones").unwrap();
    let labels: Vec<&str> = phones.intervals.iter().map(|i| i.label.as_str()).collect();
    assert_eq!(labels, ["HH", "AY"]);
    assert_eq!(phones.intervals[0].xmax, 0.2);
}

#[test]
fn hi_fixture_with_44_frames() {
    let doc = parse_textgrid(&fixture("hi.TextGrid")).unwrap();
    let table = build_alignment(&doc, 44, &MelConfig::default()).unwrap();
    assert_eq!(table.word_durations(), &[44]);
    assert_eq!(table.phoneme_durations().iter().sum::<usize>(), 44);
    check_invariants(&table);
}

#[test]
fn overlap_and_point_tiers_are_rejected() {
    match parse_textgrid(&fixture("overlap.TextGrid")) {
        Err(Error::Parse { line, msg }) => {
            assert!(line > 0);
            assert!(msg.contains("phones"), "{msg}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(parse_textgrid(&fixture("points.TextGrid")), Err(Error::Parse { .. })));
}

#[test]
fn serialize_parse_identity_on_fixtures() {
    for name in ["hi.TextGrid", "sorry.TextGrid", "silence.TextGrid"] {
        let doc = parse_textgrid(&fixture(name)).unwrap();
        assert_eq!(parse_textgrid(&serialize_textgrid(&doc)).unwrap(), doc, "{name}");
    }
}

#[test]
fn all_silence_has_no_words() {
    let cfg = MelConfig::default();
    let doc = parse_textgrid(&fixture("silence.TextGrid")).unwrap();
    let table = build_alignment(&doc, frames_for(&doc, &cfg), &cfg).unwrap();
    assert!(table.words().is_empty());
    assert!(table.frame_to_word().iter().all(Option::is_none));
    assert_eq!(table.non_silent_frames(), 0);
}

#[test]
fn multi_word_fixture() {
    let cfg = MelConfig::default();
    let doc = parse_textgrid(&fixture("sorry.TextGrid")).unwrap();
    let n = frames_for(&doc, &cfg);
    assert_eq!(n, 104);
    let table = build_alignment(&doc, n, &cfg).unwrap();
    check_invariants(&table);
    assert_eq!(table.words(), &["he", "was", "sorry"]);
    assert_eq!(table.phonemes().len(), 8);
    assert_eq!(table.phoneme_to_word(), &[0, 0, 1, 1, 1, 2, 2, 2]);
    // the pause between "was" and "sorry" lies inside their joint span
    let span = table.word_span_frames(1, 2).unwrap();
    assert!(table.frame_to_word()[span.clone()].iter().any(Option::is_none));
    assert_eq!(span.start, table.word_ranges()[1].start);
    assert_eq!(span.end, table.word_ranges()[2].end);
    // the edges of the utterance are silence and are excluded
    let all = table.word_span_frames(0, 2).unwrap();
    assert!(all.start > 0 && all.end < n);

    let json = table.to_json().unwrap();
    assert_eq!(AlignmentTable::from_json(&json).unwrap(), table);
}

#[test]
fn frame_budget_and_degenerate_intervals() {
    let cfg = MelConfig::default();
    let doc = parse_textgrid(&fixture("hi.TextGrid")).unwrap();
    for n in [43, 44, 45] {
        assert!(build_alignment(&doc, n, &cfg).is_ok(), "{n}");
    }
    assert!(matches!(build_alignment(&doc, 46, &cfg), Err(Error::ConfigMismatch(_))));
    assert!(matches!(build_alignment(&doc, 40, &cfg), Err(Error::ConfigMismatch(_))));

    // a phone too short to own any frame midpoint
    let mut short = doc.clone();
    let phones = short.tiers.iter_mut().find(|t| t.name == "phones").unwrap();
    phones.intervals[0].xmax = 0.001;
    phones.intervals[1].xmin = 0.001;
    assert!(matches!(build_alignment(&short, 44, &cfg), Err(Error::DegenerateAlignment(_))));
}

#[test]
fn custom_silence_labels() {
    let cfg = MelConfig::default();
    let doc = parse_textgrid(&fixture("hi.TextGrid")).unwrap();
    let mut opts = AlignmentOptions::default();
    opts.silence_labels.push("HH".into());
    let table = build_alignment_with(&doc, 44, &cfg, &opts).unwrap();
    assert_eq!(table.phonemes(), &["AY"]);
    assert!(table.frame_to_word()[0].is_none());
    check_invariants(&table);
}

#[test]
fn word_span_examples() {
    let mut f2w = vec![None; 10];
    f2w.extend(std::iter::repeat_n(Some(0), 10));
    f2w.extend(std::iter::repeat_n(None, 5));
    f2w.extend(std::iter::repeat_n(Some(1), 15));
    let words = vec!["a".to_string(), "b".to_string()];
    let table = AlignmentTable::from_frames(words.clone(), words, f2w.clone(), f2w).unwrap();
    assert_eq!(table.word_span_frames(0, 0).unwrap(), 10..20);
    assert_eq!(table.word_span_frames(0, 1).unwrap(), 10..40);
    assert!(matches!(table.word_span_frames(0, 2), Err(Error::Index(_))));
    assert!(matches!(table.word_span_frames(1, 0), Err(Error::Index(_))));
}

fn arb_doc() -> impl Strategy<Value = TextGridDoc> {
    let word = (prop::bool::ANY, prop::collection::vec(1u32..40, 1..4));
    prop::collection::vec(word, 1..6).prop_map(|words| {
        let mut t = 0.0;
        let mut phones = Vec::new();
        let mut wtier = Vec::new();
        for (w, (pause, durs)) in words.into_iter().enumerate() {
            if pause {
                let end = t + 0.05;
                phones.push(Interval { xmin: t, xmax: end, label: "sp".into() });
                wtier.push(Interval { xmin: t, xmax: end, label: String::new() });
                t = end;
            }
            let start = t;
            for (p, d) in durs.iter().enumerate() {
                let end = t + 0.025 + *d as f64 / 200.0;
                phones.push(Interval { xmin: t, xmax: end, label: format!("P{w}{p}") });
                t = end;
            }
            wtier.push(Interval { xmin: start, xmax: t, label: format!("w{w}") });
        }
        let tier = |name: &str, intervals| IntervalTier { name: name.into(), xmin: 0.0, xmax: t, intervals };
        TextGridDoc { xmin: 0.0, xmax: t, tiers: vec![tier("phones", phones), tier("words", wtier)] }
    })
}

proptest! {
    #[test]
    fn random_textgrids_satisfy_invariants(doc in arb_doc()) {
        let cfg = MelConfig::default();
        let parsed = parse_textgrid(&serialize_textgrid(&doc)).unwrap();
        prop_assert_eq!(&parsed, &doc);
        let table = build_alignment(&parsed, frames_for(&doc, &cfg), &cfg).unwrap();
        check_invariants(&table);
        prop_assert_eq!(table.words().len(), doc.tier("words").unwrap().intervals.iter().filter(|i| !i.label.is_empty()).count());
    }

    #[test]
    fn parse_textgrid_is_total(text in ".{0,400}") {
        let _ = parse_textgrid(&text);
    }

    #[test]
    fn mutated_fixture_never_panics(cut in 0usize..1000, junk in "[0-9a-z\"= \\[\\]\n]{0,20}") {
        let text = fixture("sorry.TextGrid");
        let at = cut.min(text.len());
        let mut mutated = text[..at].to_string();
        mutated.push_str(&junk);
        mutated.push_str(&text[at..]);
        let _ = parse_textgrid(&mutated);
    }

    #[test]
    fn alignment_json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = common::random_table(&mut rng, 1..=8, 3, 4, true);
        prop_assert_eq!(AlignmentTable::from_json(&table.to_json().unwrap()).unwrap(), table);
    }
}
