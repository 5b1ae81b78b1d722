//! Run-time edit mechanics: word diff, frame-region lookup, and splicing of
//! predicted acoustics into the original spectrogram.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentTable;
use crate::error::{Error, Result};
use crate::spectral::MelSpectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Insertion,
    Replacement,
    Deletion,
}

/// One contiguous change. `orig_range` is a half-open range of original
/// word indices; for insertions it is empty and starts at `anchor`, the
/// original word the new words are placed before.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EditOpJson", into = "EditOpJson")]
pub struct EditOp {
    kind: EditKind,
    orig_range: Range<usize>,
    new_words: Vec<String>,
}

impl EditOp {
    /// Infers the kind from which side is empty.
    pub fn new(orig_range: Range<usize>, new_words: Vec<String>) -> Result<Self> {
        let kind = match (orig_range.is_empty(), new_words.is_empty()) {
            (true, false) => EditKind::Insertion,
            (false, true) => EditKind::Deletion,
            (false, false) => EditKind::Replacement,
            (true, true) => {
                return Err(Error::InvalidArgument("edit op changes nothing".into()));
            }
        };
        if orig_range.start > orig_range.end {
            return Err(Error::InvalidArgument(format!("reversed word range {orig_range:?}")));
        }
        Ok(Self {
            kind,
            orig_range,
            new_words,
        })
    }

    pub fn kind(&self) -> EditKind {
        self.kind
    }

    pub fn orig_range(&self) -> Range<usize> {
        self.orig_range.clone()
    }

    pub fn anchor(&self) -> usize {
        self.orig_range.start
    }

    pub fn new_words(&self) -> &[String] {
        &self.new_words
    }
}

#[derive(Serialize, Deserialize)]
struct EditOpJson {
    kind: EditKind,
    orig_range: [usize; 2],
    anchor: usize,
    new_words: Vec<String>,
}

impl From<EditOp> for EditOpJson {
    fn from(op: EditOp) -> Self {
        Self {
            kind: op.kind,
            orig_range: [op.orig_range.start, op.orig_range.end],
            anchor: op.orig_range.start,
            new_words: op.new_words,
        }
    }
}

impl TryFrom<EditOpJson> for EditOp {
    type Error = Error;

    fn try_from(raw: EditOpJson) -> Result<Self> {
        let [a, b] = raw.orig_range;
        if raw.anchor != a {
            return Err(Error::InvalidArgument(format!("anchor {} differs from range start {a}", raw.anchor)));
        }
        let op = EditOp::new(a..b, raw.new_words)?;
        if op.kind != raw.kind {
            return Err(Error::InvalidArgument(format!(
                "op declared {:?} but its ranges make it {:?}",
                raw.kind, op.kind
            )));
        }
        Ok(op)
    }
}

/// Ordered, non-overlapping ops that turn `orig_words` into `edited_words`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EditPlanJson")]
pub struct EditPlan {
    ops: Vec<EditOp>,
    orig_words: Vec<String>,
    edited_words: Vec<String>,
}

#[derive(Deserialize)]
struct EditPlanJson {
    ops: Vec<EditOp>,
    orig_words: Vec<String>,
    edited_words: Vec<String>,
}

impl TryFrom<EditPlanJson> for EditPlan {
    type Error = Error;

    fn try_from(raw: EditPlanJson) -> Result<Self> {
        EditPlan::new(raw.ops, raw.orig_words, raw.edited_words)
    }
}

impl EditPlan {
    pub fn new(ops: Vec<EditOp>, orig_words: Vec<String>, edited_words: Vec<String>) -> Result<Self> {
        let mut prev_end = 0;
        for (i, op) in ops.iter().enumerate() {
            let r = op.orig_range();
            if r.end > orig_words.len() {
                return Err(Error::InvalidArgument(format!("op {i} range {r:?} past {} words", orig_words.len())));
            }
            // ops must be strictly ordered; two ops may not share an anchor
            if i > 0 && (r.start < prev_end || (r.start == prev_end && op.kind == EditKind::Insertion)) {
                return Err(Error::InvalidArgument(format!("op {i} overlaps or touches the previous op")));
            }
            prev_end = r.end;
        }
        let replayed = apply_ops(&orig_words, &ops);
        if replayed != edited_words {
            return Err(Error::InvalidArgument("ops do not turn orig_words into edited_words".into()));
        }
        Ok(Self {
            ops,
            orig_words,
            edited_words,
        })
    }

    pub fn ops(&self) -> &[EditOp] {
        &self.ops
    }

    pub fn orig_words(&self) -> &[String] {
        &self.orig_words
    }

    pub fn edited_words(&self) -> &[String] {
        &self.edited_words
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Replays `ops` (ordered left to right) on `orig`.
pub fn apply_ops(orig: &[String], ops: &[EditOp]) -> Vec<String> {
    let mut out = Vec::with_capacity(orig.len());
    let mut next = 0;
    for op in ops {
        let r = op.orig_range();
        out.extend_from_slice(&orig[next.min(r.start)..r.start]);
        out.extend(op.new_words.iter().cloned());
        next = r.end.max(next);
    }
    out.extend_from_slice(&orig[next.min(orig.len())..]);
    out
}

/// Lower-cases and splits on whitespace, dropping surrounding punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Word-level diff from a longest-common-subsequence alignment. Every maximal
/// run of unmatched words becomes one op.
pub fn diff_words(orig: &[String], edited: &[String]) -> EditPlan {
    let (n, m) = (orig.len(), edited.len());
    // lcs[i][j] = LCS length of orig[i..] and edited[j..]
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if orig[i] == edited[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }

    let mut ops = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut run_i, mut run_j) = (0, 0);
    let flush = |ops: &mut Vec<EditOp>, run_i: usize, i: usize, run_j: usize, j: usize| {
        if run_i < i || run_j < j {
            // non-empty by construction
            if let Ok(op) = EditOp::new(run_i..i, edited[run_j..j].to_vec()) {
                ops.push(op);
            }
        }
    };
    while i < n || j < m {
        if i < n && j < m && orig[i] == edited[j] {
            flush(&mut ops, run_i, i, run_j, j);
            i += 1;
            j += 1;
            run_i = i;
            run_j = j;
        } else if j == m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    flush(&mut ops, run_i, i, run_j, j);

    EditPlan {
        ops,
        orig_words: orig.to_vec(),
        edited_words: edited.to_vec(),
    }
}

/// `original[..start] ‖ predicted ‖ original[end..]`; `None` deletes the region.
pub fn splice(
    original: &MelSpectrogram,
    region: Range<usize>,
    predicted: Option<&MelSpectrogram>,
) -> Result<MelSpectrogram> {
    if region.start > region.end || region.end > original.n_frames() {
        return Err(Error::Index(format!(
            "splice region {region:?} outside 0..{}",
            original.n_frames()
        )));
    }
    if let Some(p) = predicted {
        if p.config() != original.config() {
            return Err(Error::ConfigMismatch("predicted frames use a different mel config".into()));
        }
    }
    let head = original.slice_frames(0..region.start)?;
    let tail = original.slice_frames(region.end..original.n_frames())?;
    match predicted {
        Some(p) => MelSpectrogram::concat(&[&head, p, &tail]),
        None => MelSpectrogram::concat(&[&head, &tail]),
    }
}

/// Linear interpolation per bin between the frame before `region` and the
/// frame after it, at `t = k / (target_len + 1)`. With context on one side
/// only, that frame is repeated.
pub fn baseline_predict(
    original: &MelSpectrogram,
    region: Range<usize>,
    target_len: usize,
) -> Result<MelSpectrogram> {
    if target_len == 0 {
        return Err(Error::InvalidArgument("target_len must be at least 1".into()));
    }
    let n = original.n_frames();
    if region.start > region.end || region.end > n {
        return Err(Error::Index(format!("region {region:?} outside 0..{n}")));
    }
    let data = original.data();
    let left = (region.start > 0).then(|| data.row(region.start - 1));
    let right = (region.end < n).then(|| data.row(region.end));
    let (left, right) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        (Some(l), None) => (l, l),
        (None, Some(r)) => (r, r),
        (None, None) => return Err(Error::EmptyContext(region)),
    };
    let out = Array2::from_shape_fn((target_len, original.n_mels()), |(k, b)| {
        let t = (k + 1) as f64 / (target_len + 1) as f64;
        let (l, r) = (left[b] as f64, right[b] as f64);
        (l + (r - l) * t) as f32
    });
    MelSpectrogram::new(out, *original.config())
}

/// Produces acoustics for an edited region.
pub trait Predictor {
    fn predict(
        &self,
        original: &MelSpectrogram,
        region: Range<usize>,
        target_len: usize,
        op: &EditOp,
    ) -> Result<MelSpectrogram>;
}

/// [`baseline_predict`] as a [`Predictor`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselinePredictor;

impl Predictor for BaselinePredictor {
    fn predict(
        &self,
        original: &MelSpectrogram,
        region: Range<usize>,
        target_len: usize,
        _op: &EditOp,
    ) -> Result<MelSpectrogram> {
        baseline_predict(original, region, target_len)
    }
}

/// Duration rule for inserted and replacement words.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EditOptions {
    /// Frames per new word; `None` uses the median word duration of the
    /// original utterance.
    pub frames_per_word: Option<f64>,
}

/// The frame region an op replaces and the number of frames it inserts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedSplice {
    pub op_index: usize,
    pub region: Range<usize>,
    pub inserted_frames: usize,
}

pub fn median(values: &[usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    })
}

/// Resolves every op to original-frame coordinates, in plan order.
pub fn plan_splices(table: &AlignmentTable, plan: &EditPlan, opts: &EditOptions) -> Result<Vec<PlannedSplice>> {
    let matches = plan.orig_words().len() == table.words().len()
        && plan
            .orig_words()
            .iter()
            .zip(table.words())
            .all(|(a, b)| a.to_lowercase() == b.to_lowercase());
    if !matches {
        return Err(Error::PlanMismatch(format!(
            "plan has words {:?}, alignment has {:?}",
            plan.orig_words(),
            table.words()
        )));
    }
    let per_word = match opts.frames_per_word {
        Some(v) if v.is_finite() && v > 0.0 => Some(v),
        Some(v) => return Err(Error::InvalidArgument(format!("frames_per_word {v} must be positive"))),
        None => median(table.word_durations()),
    };
    let n_words = table.words().len();
    plan.ops()
        .iter()
        .enumerate()
        .map(|(op_index, op)| {
            let r = op.orig_range();
            let region = if op.kind() == EditKind::Insertion {
                let at = if r.start < n_words {
                    table.word_ranges()[r.start].start
                } else if n_words > 0 {
                    table.word_ranges()[n_words - 1].end
                } else {
                    0
                };
                at..at
            } else {
                table.word_span_frames(r.start, r.end - 1)?
            };
            let inserted_frames = if op.new_words().is_empty() {
                0
            } else {
                let per_word = per_word.ok_or_else(|| {
                    Error::InvalidArgument("no word durations to size inserted words".into())
                })?;
                ((op.new_words().len() as f64 * per_word).round() as usize).max(1)
            };
            Ok(PlannedSplice {
                op_index,
                region,
                inserted_frames,
            })
        })
        .collect()
}

/// Applies every op right to left so earlier frame indices stay valid.
pub fn edit_pipeline(
    original: &MelSpectrogram,
    table: &AlignmentTable,
    plan: &EditPlan,
    predictor: &dyn Predictor,
    opts: &EditOptions,
) -> Result<MelSpectrogram> {
    if table.n_frames() != original.n_frames() {
        return Err(Error::PlanMismatch(format!(
            "alignment covers {} frames, spectrogram has {}",
            table.n_frames(),
            original.n_frames()
        )));
    }
    let splices = plan_splices(table, plan, opts)?;
    let mut current = original.clone();
    for s in splices.iter().rev() {
        let op = &plan.ops()[s.op_index];
        current = if s.inserted_frames == 0 {
            splice(&current, s.region.clone(), None)?
        } else {
            let predicted = predictor.predict(&current, s.region.clone(), s.inserted_frames, op)?;
            splice(&current, s.region.clone(), Some(&predicted))?
        };
    }
    Ok(current)
}
