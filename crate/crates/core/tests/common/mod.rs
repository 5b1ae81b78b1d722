#![allow(dead_code)]

use fluentcrit::alignment::AlignmentTable;
use fluentcrit::spectral::{MelConfig, MelSpectrogram};
use ndarray::Array2;
use std::ops::RangeInclusive;

use rand::Rng;

/// Random alignment: a number of words drawn from `n_words` of `1..=max_phones` phonemes, each
/// phoneme `1..=max_phone_len` frames, with optional silence runs before,
/// between and after words.
pub fn random_table<R: Rng>(
    rng: &mut R,
    n_words: RangeInclusive<usize>,
    max_phones: usize,
    max_phone_len: usize,
    silence: bool,
) -> AlignmentTable {
    let n_words = rng.random_range(n_words);
    let mut f2p = Vec::new();
    let mut f2w = Vec::new();
    let mut p = 0;
    let pause = |rng: &mut R, f2p: &mut Vec<Option<usize>>, f2w: &mut Vec<Option<usize>>| {
        if silence && rng.random_bool(0.4) {
            let n = rng.random_range(1..=3);
            f2p.extend(std::iter::repeat_n(None, n));
            f2w.extend(std::iter::repeat_n(None, n));
        }
    };
    for w in 0..n_words {
        pause(rng, &mut f2p, &mut f2w);
        for _ in 0..rng.random_range(1..=max_phones) {
            let len = rng.random_range(1..=max_phone_len);
            f2p.extend(std::iter::repeat_n(Some(p), len));
            f2w.extend(std::iter::repeat_n(Some(w), len));
            p += 1;
        }
    }
    pause(rng, &mut f2p, &mut f2w);
    AlignmentTable::from_frames(
        (0..p).map(|i| format!("p{i}")).collect(),
        (0..n_words).map(|i| format!("w{i}")).collect(),
        f2p,
        f2w,
    )
    .expect("generated alignment is valid")
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

pub fn config(n_mels: usize) -> MelConfig {
    MelConfig {
        n_mels: n_mels as u32,
        ..MelConfig::default()
    }
}

pub fn random_mel<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> MelSpectrogram {
    let data = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-11.5f32..2.0));
    MelSpectrogram::new(data, config(cols)).unwrap()
}
