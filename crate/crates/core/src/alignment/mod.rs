//! Frame → phoneme → word hierarchy built from forced-alignment TextGrids.

mod textgrid;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::MelConfig;

pub use textgrid::{
    parse_textgrid, parse_textgrid_with, serialize_textgrid, Interval, IntervalTier, TextGridDoc,
    TierNames,
};

/// Which tiers to read and which labels count as silence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentOptions {
    pub tiers: TierNames,
    pub silence_labels: Vec<String>,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        Self {
            tiers: TierNames::default(),
            silence_labels: ["", "sil", "sp", "spn"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AlignmentOptions {
    pub fn is_silence(&self, label: &str) -> bool {
        let label = label.trim();
        self.silence_labels.iter().any(|s| s == label)
    }
}

/// Per-frame phoneme and word membership. `None` marks silence.
///
/// Invariants (checked on construction): both per-frame vectors have the
/// same length and are silent on exactly the same frames; indices are
/// non-decreasing over non-silent frames; every phoneme and word owns at
/// least one frame; all frames of a phoneme belong to one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentTable {
    words: Vec<String>,
    phonemes: Vec<String>,
    frame_to_phoneme: Vec<Option<usize>>,
    frame_to_word: Vec<Option<usize>>,
    phoneme_to_word: Vec<usize>,
    phoneme_durations: Vec<usize>,
    word_durations: Vec<usize>,
    phoneme_ranges: Vec<Range<usize>>,
    word_ranges: Vec<Range<usize>>,
}

impl AlignmentTable {
    /// Builds a table from per-frame labels, deriving durations and the
    /// phoneme → word map.
    pub fn from_frames(
        phonemes: Vec<String>,
        words: Vec<String>,
        frame_to_phoneme: Vec<Option<usize>>,
        frame_to_word: Vec<Option<usize>>,
    ) -> Result<Self> {
        let degenerate = |m: String| Err(Error::DegenerateAlignment(m));
        if frame_to_phoneme.len() != frame_to_word.len() {
            return Err(Error::Shape(format!(
                "{} phoneme labels vs {} word labels",
                frame_to_phoneme.len(),
                frame_to_word.len()
            )));
        }
        let mut phoneme_durations = vec![0usize; phonemes.len()];
        let mut word_durations = vec![0usize; words.len()];
        let mut phoneme_ranges = vec![usize::MAX..0; phonemes.len()];
        let mut word_ranges = vec![usize::MAX..0; words.len()];
        let mut phoneme_to_word: Vec<Option<usize>> = vec![None; phonemes.len()];
        let mut last: Option<(usize, usize)> = None;

        for (f, (p, w)) in frame_to_phoneme.iter().zip(&frame_to_word).enumerate() {
            let (p, w) = match (p, w) {
                (None, None) => continue,
                (Some(p), Some(w)) => (*p, *w),
                _ => return degenerate(format!("frame {f} is silent on only one level")),
            };
            if p >= phonemes.len() || w >= words.len() {
                return Err(Error::Index(format!("frame {f} refers to phoneme {p} / word {w}")));
            }
            if let Some((lp, lw)) = last {
                if p < lp || w < lw {
                    return degenerate(format!("frame {f} goes backwards"));
                }
            }
            last = Some((p, w));
            match phoneme_to_word[p] {
                Some(owner) if owner != w => {
                    return degenerate(format!(
                        "phoneme {p} (`{}`) straddles words {owner} and {w}",
                        phonemes[p]
                    ))
                }
                _ => phoneme_to_word[p] = Some(w),
            }
            phoneme_durations[p] += 1;
            word_durations[w] += 1;
            for range in [&mut phoneme_ranges[p], &mut word_ranges[w]] {
                range.start = range.start.min(f);
                range.end = range.end.max(f + 1);
            }
        }
        if let Some(p) = phoneme_durations.iter().position(|&d| d == 0) {
            return degenerate(format!("phoneme {p} (`{}`) receives no frames", phonemes[p]));
        }
        if let Some(w) = word_durations.iter().position(|&d| d == 0) {
            return degenerate(format!("word {w} (`{}`) receives no frames", words[w]));
        }
        Ok(Self {
            words,
            phonemes,
            frame_to_phoneme,
            frame_to_word,
            phoneme_to_word: phoneme_to_word.into_iter().map(|w| w.unwrap_or(0)).collect(),
            phoneme_durations,
            word_durations,
            phoneme_ranges,
            word_ranges,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frame_to_word.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn phonemes(&self) -> &[String] {
        &self.phonemes
    }

    pub fn frame_to_phoneme(&self) -> &[Option<usize>] {
        &self.frame_to_phoneme
    }

    pub fn frame_to_word(&self) -> &[Option<usize>] {
        &self.frame_to_word
    }

    pub fn phoneme_to_word(&self) -> &[usize] {
        &self.phoneme_to_word
    }

    pub fn phoneme_durations(&self) -> &[usize] {
        &self.phoneme_durations
    }

    pub fn word_durations(&self) -> &[usize] {
        &self.word_durations
    }

    /// Frame extent `[first, last + 1)` of each phoneme.
    pub fn phoneme_ranges(&self) -> &[Range<usize>] {
        &self.phoneme_ranges
    }

    /// Frame extent `[first, last + 1)` of each word.
    pub fn word_ranges(&self) -> &[Range<usize>] {
        &self.word_ranges
    }

    pub fn non_silent_frames(&self) -> usize {
        self.word_durations.iter().sum()
    }

    /// Half-open frame interval covering words `first..=last`, including any
    /// silence strictly between them.
    pub fn word_span_frames(&self, first_word: usize, last_word: usize) -> Result<Range<usize>> {
        if first_word > last_word || last_word >= self.words.len() {
            return Err(Error::Index(format!(
                "word range {first_word}..={last_word} invalid for {} words",
                self.words.len()
            )));
        }
        Ok(self.word_ranges[first_word].start..self.word_ranges[last_word].end)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&AlignmentJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AlignmentJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DurationsJson {
    phonemes: Vec<usize>,
    words: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentJson {
    words: Vec<String>,
    phonemes: Vec<String>,
    frame_to_phoneme: Vec<Option<usize>>,
    frame_to_word: Vec<Option<usize>>,
    phoneme_to_word: Vec<usize>,
    durations: DurationsJson,
}

impl From<&AlignmentTable> for AlignmentJson {
    fn from(t: &AlignmentTable) -> Self {
        Self {
            words: t.words.clone(),
            phonemes: t.phonemes.clone(),
            frame_to_phoneme: t.frame_to_phoneme.clone(),
            frame_to_word: t.frame_to_word.clone(),
            phoneme_to_word: t.phoneme_to_word.clone(),
            durations: DurationsJson {
                phonemes: t.phoneme_durations.clone(),
                words: t.word_durations.clone(),
            },
        }
    }
}

impl TryFrom<AlignmentJson> for AlignmentTable {
    type Error = Error;

    fn try_from(raw: AlignmentJson) -> Result<Self> {
        let table =
            Self::from_frames(raw.phonemes, raw.words, raw.frame_to_phoneme, raw.frame_to_word)?;
        if table.phoneme_to_word != raw.phoneme_to_word
            || table.phoneme_durations != raw.durations.phonemes
            || table.word_durations != raw.durations.words
        {
            return Err(Error::InvalidArgument(
                "alignment JSON durations or phoneme_to_word disagree with frame labels".into(),
            ));
        }
        Ok(table)
    }
}

/// Maps each frame to the interval containing the midpoint of its hop cell,
/// `(i + 1/2) · hop / sr`. Ties go to the later interval; midpoints past the
/// tier end fall into the last interval.
fn assign_frames(tier: &IntervalTier, n_frames: usize, cfg: &MelConfig) -> Vec<usize> {
    let period = cfg.frame_period_secs();
    let mut out = Vec::with_capacity(n_frames);
    let mut k = 0;
    for i in 0..n_frames {
        let t = (i as f64 + 0.5) * period;
        while k + 1 < tier.intervals.len() && t >= tier.intervals[k].xmax {
            k += 1;
        }
        out.push(k);
    }
    out
}

/// [`build_alignment_with`] using MFA's `phones`/`words` tiers and silence labels.
pub fn build_alignment(doc: &TextGridDoc, n_frames: usize, cfg: &MelConfig) -> Result<AlignmentTable> {
    build_alignment_with(doc, n_frames, cfg, &AlignmentOptions::default())
}

pub fn build_alignment_with(
    doc: &TextGridDoc,
    n_frames: usize,
    cfg: &MelConfig,
    opts: &AlignmentOptions,
) -> Result<AlignmentTable> {
    cfg.validate()?;
    let tier = |name: &str| {
        doc.tier(name)
            .ok_or_else(|| Error::InvalidArgument(format!("TextGrid has no tier `{name}`")))
    };
    let phones = tier(&opts.tiers.phones)?;
    let words = tier(&opts.tiers.words)?;

    let n_samples = (doc.xmax * cfg.sample_rate_hz as f64).round() as usize;
    let expected = cfg.frames_for_samples(n_samples);
    if n_frames.abs_diff(expected) > 1 {
        return Err(Error::ConfigMismatch(format!(
            "TextGrid lasts {}s ({expected} frames) but spectrogram has {n_frames} frames",
            doc.xmax
        )));
    }

    let phone_of_frame = assign_frames(phones, n_frames, cfg);
    let word_of_frame = assign_frames(words, n_frames, cfg);

    // Retained (non-silent) units, indexed by interval position.
    let retain = |tier: &IntervalTier| {
        let mut labels = Vec::new();
        let index: Vec<Option<usize>> = tier
            .intervals
            .iter()
            .map(|iv| {
                (!opts.is_silence(&iv.label)).then(|| {
                    labels.push(iv.label.trim().to_string());
                    labels.len() - 1
                })
            })
            .collect();
        (labels, index)
    };
    let (phoneme_labels, phone_index) = retain(phones);
    let (word_labels, word_index) = retain(words);

    let mut frame_to_phoneme = Vec::with_capacity(n_frames);
    let mut frame_to_word = Vec::with_capacity(n_frames);
    for (&pi, &wi) in phone_of_frame.iter().zip(&word_of_frame) {
        match (phone_index[pi], word_index[wi]) {
            (Some(p), Some(w)) => {
                frame_to_phoneme.push(Some(p));
                frame_to_word.push(Some(w));
            }
            _ => {
                frame_to_phoneme.push(None);
                frame_to_word.push(None);
            }
        }
    }
    AlignmentTable::from_frames(phoneme_labels, word_labels, frame_to_phoneme, frame_to_word)
}
