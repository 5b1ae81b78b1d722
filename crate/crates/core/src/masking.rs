//! Word-level masking: pick one contiguous run of whole words and replace
//! its frames with random vectors.

use std::ops::Range;

use ndarray::s;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentTable;
use crate::error::{Error, Result};
use crate::spectral::MelSpectrogram;

/// A word-aligned masked region `[start, end)` covering words
/// `first_word..=last_word`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub start: usize,
    pub end: usize,
    pub first_word: usize,
    pub last_word: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks bounds and that the span starts and ends on the boundaries of
    /// its word range.
    pub fn validate(&self, table: &AlignmentTable) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.start > self.end || self.end > table.n_frames() {
            return Err(Error::Index(format!(
                "mask span {:?} outside 0..{}",
                self.span(),
                table.n_frames()
            )));
        }
        let words = table.word_span_frames(self.first_word, self.last_word)?;
        if words != self.span() {
            return Err(Error::InvalidArgument(format!(
                "mask span {:?} is not aligned to words {}..={} ({words:?})",
                self.span(),
                self.first_word,
                self.last_word
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Chooses the run of consecutive words whose non-silent frame count is
/// closest to `lambda` times the utterance's non-silent frame count. Pauses
/// inside the run are masked with it but not counted. Ties are broken
/// uniformly with a generator seeded by `seed`.
pub fn select_word_mask(table: &AlignmentTable, lambda: f64, seed: u64) -> Result<MaskSpec> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside (0, 1]")));
    }
    let n_words = table.words().len();
    if n_words == 0 {
        return Err(Error::NoWords);
    }
    let target = lambda * table.non_silent_frames() as f64;
    let ranges = table.word_ranges();
    // voiced[k] = frames in words 0..k
    let mut voiced = vec![0.0; n_words + 1];
    for (w, &d) in table.word_durations().iter().enumerate() {
        voiced[w + 1] = voiced[w] + d as f64;
    }

    let mut best = f64::INFINITY;
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for first in 0..n_words {
        for last in first..n_words {
            let len = voiced[last + 1] - voiced[first];
            let gap = (len - target).abs();
            if gap < best {
                best = gap;
                candidates.clear();
            }
            if gap == best {
                candidates.push((first, last));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (first_word, last_word) = candidates[rng.random_range(0..candidates.len())];
    Ok(MaskSpec {
        start: ranges[first_word].start,
        end: ranges[last_word].end,
        first_word,
        last_word,
        lambda,
        seed,
    })
}

/// Replaces the frames in `spec.span()` with i.i.d. standard-normal values.
pub fn apply_mask(mel: &MelSpectrogram, spec: &MaskSpec, seed: u64) -> Result<MelSpectrogram> {
    if spec.start > spec.end || spec.end > mel.n_frames() {
        return Err(Error::Index(format!(
            "mask span {:?} outside 0..{}",
            spec.span(),
            mel.n_frames()
        )));
    }
    let mut data = mel.data().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in data.slice_mut(s![spec.span(), ..]).iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    MelSpectrogram::new(data, *mel.config())
}
