mod common;

use fluentcrit::alignment::AlignmentTable;
use fluentcrit::masking::{apply_mask, select_word_mask, MaskSpec};
use fluentcrit::Error;
use ndarray::s;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uniform(n_words: usize, frames: usize) -> AlignmentTable {
    let f2w: Vec<Option<usize>> = (0..n_words * frames).map(|f| Some(f / frames)).collect();
    let words: Vec<String> = (0..n_words).map(|w| format!("w{w}")).collect();
    AlignmentTable::from_frames(words.clone(), words, f2w.clone(), f2w).unwrap()
}

#[test]
fn ten_by_ten_at_eighty_percent() {
    let table = uniform(10, 10);
    let mut starts = std::collections::BTreeSet::new();
    for seed in 0..64 {
        let spec = select_word_mask(&table, 0.8, seed).unwrap();
        assert_eq!(spec.len(), 80);
        assert_eq!(spec.last_word - spec.first_word, 7);
        starts.insert(spec.first_word);
    }
    // every one of the three optimal runs is reachable
    assert_eq!(starts.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn full_and_single_word_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let table = common::random_table(&mut rng, 5..=5, 2, 3, true);
    assert!(table.frame_to_word()[table.word_span_frames(0, 4).unwrap()].iter().any(Option::is_none));
    for seed in 0..10 {
        let spec = select_word_mask(&table, 1.0, seed).unwrap();
        assert_eq!(spec.span(), table.word_span_frames(0, 4).unwrap());
    }
    let one = uniform(1, 7);
    let spec = select_word_mask(&one, 0.3, 9).unwrap();
    assert_eq!((spec.start, spec.end, spec.first_word, spec.last_word), (0, 7, 0, 0));
}

#[test]
fn errors() {
    let empty = AlignmentTable::from_frames(vec![], vec![], vec![None; 4], vec![None; 4]).unwrap();
    assert!(matches!(select_word_mask(&empty, 0.5, 0), Err(Error::NoWords)));
    let table = uniform(3, 4);
    assert!(select_word_mask(&table, 1.5, 0).is_err());
    assert!(select_word_mask(&table, f64::NAN, 0).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mel = common::random_mel(&mut rng, 12, 4);
    let spec = MaskSpec { start: 10, end: 13, first_word: 2, last_word: 2, lambda: 0.5, seed: 0 };
    assert!(matches!(apply_mask(&mel, &spec, 0), Err(Error::Index(_))));
    assert!(spec.validate(&table).is_err());
}

#[test]
fn apply_mask_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mel = common::random_mel(&mut rng, 20, 6);
    let empty = MaskSpec { start: 5, end: 5, first_word: 0, last_word: 0, lambda: 0.0, seed: 0 };
    assert_eq!(apply_mask(&mel, &empty, 1).unwrap(), mel);

    let spec = MaskSpec { start: 4, end: 12, first_word: 0, last_word: 0, lambda: 0.5, seed: 0 };
    assert_eq!(apply_mask(&mel, &spec, 1).unwrap(), apply_mask(&mel, &spec, 1).unwrap());

    let full = MaskSpec { start: 0, end: 20, first_word: 0, last_word: 0, lambda: 1.0, seed: 0 };
    let a = apply_mask(&mel, &full, 1).unwrap();
    let b = apply_mask(&mel, &full, 2).unwrap();
    assert_eq!(a.config(), b.config());
    assert_eq!(a.data().dim(), b.data().dim());
    assert!(a.data().iter().zip(b.data().iter()).all(|(x, y)| x != y));

    let masked = apply_mask(&mel, &spec, 5).unwrap();
    assert_eq!(masked.data().slice(s![..4, ..]), mel.data().slice(s![..4, ..]));
    assert_eq!(masked.data().slice(s![12.., ..]), mel.data().slice(s![12.., ..]));
    assert_ne!(masked.data().slice(s![4..12, ..]), mel.data().slice(s![4..12, ..]));
}

proptest! {
    #[test]
    fn mask_is_word_aligned_optimal_and_deterministic(
        seed in any::<u64>(),
        lambda in 0.01f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = common::random_table(&mut rng, 1..=20, 3, 4, true);
        let spec = select_word_mask(&table, lambda, seed).unwrap();
        prop_assert_eq!(&select_word_mask(&table, lambda, seed).unwrap(), &spec);
        spec.validate(&table).unwrap();
        prop_assert_eq!(spec.span(), table.word_span_frames(spec.first_word, spec.last_word).unwrap());

        let f2w = table.frame_to_word();
        for f in spec.span() {
            if let Some(w) = f2w[f] {
                prop_assert!(f2w.iter().enumerate().all(|(g, v)| *v != Some(w) || spec.span().contains(&g)));
            }
        }
        let voiced_in = |r: std::ops::Range<usize>| f2w[r].iter().filter(|w| w.is_some()).count() as f64;
        let target = lambda * voiced_in(0..f2w.len());
        let n = table.words().len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a..n {
                let len = voiced_in(table.word_span_frames(a, b).unwrap());
                best = best.min((len - target).abs());
            }
        }
        prop_assert_eq!((voiced_in(spec.span()) - target).abs(), best);
    }

    #[test]
    fn mask_spec_json_round_trips(seed in any::<u64>(), lambda in 0.01f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = common::random_table(&mut rng, 1..=6, 2, 4, true);
        let spec = select_word_mask(&table, lambda, seed).unwrap();
        prop_assert_eq!(MaskSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
    }
}
