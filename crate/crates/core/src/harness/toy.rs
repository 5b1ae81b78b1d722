//! A toy optimisation loop: the masked frames are free parameters fitted by
//! gradient descent on the total loss, with no neural model in the way.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::boundary_discontinuity;
use crate::alignment::AlignmentTable;
use crate::criteria::{loss_gradient, total_loss, BatchContext, BatchItem, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::masking::{apply_mask, MaskSpec};
use crate::spectral::{MelConfig, MelSpectrogram};

pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_LR: f64 = 0.1;
/// Give up on a step after this many halvings of the learning rate.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRunResult {
    /// Total loss before the first step and after every step.
    pub trajectory: Vec<f64>,
    pub final_loss: LossBreakdown,
    pub initial_boundary_discontinuity: f64,
    pub final_boundary_discontinuity: f64,
    pub seed: u64,
    pub steps: usize,
    pub learning_rate: f64,
    /// Learning rate after all step-halvings.
    pub final_learning_rate: f64,
    #[serde(skip)]
    pub prediction: Array2<f64>,
}

/// The `(start, end)` boundaries of the span that have frames on both sides.
pub fn span_boundaries(spec: &MaskSpec, n_frames: usize) -> Vec<usize> {
    [spec.start, spec.end]
        .into_iter()
        .filter(|&b| b >= 1 && b < n_frames)
        .collect()
}

/// A second utterance derived from `gt` with shifted per-bin levels and extra
/// frame noise, used as the contrastive negative.
pub fn surrogate_utterance(gt: &Array2<f64>, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let offsets: Array1<f64> = (0..gt.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut out = gt + &offsets;
    for v in out.iter_mut() {
        *v += rng.sample(noise);
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn toy_train(
    gt: &MelSpectrogram,
    table: &AlignmentTable,
    spec: &MaskSpec,
    weights: &LossWeights,
    tau: f64,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<ToyRunResult> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {lr} must be positive")));
    }
    spec.validate(table)?;
    if table.n_frames() != gt.n_frames() {
        return Err(Error::Shape(format!(
            "alignment covers {} frames, spectrogram has {}",
            table.n_frames(),
            gt.n_frames()
        )));
    }
    let target = gt.to_f64();
    let mut pred = apply_mask(gt, spec, seed)?.to_f64();
    let negative = surrogate_utterance(&target, seed);
    let batch = BatchContext::new(vec![BatchItem::from_standin(negative.view(), spec.span())?]);
    let boundaries = span_boundaries(spec, gt.n_frames());
    let discontinuity = |p: &Array2<f64>| {
        if boundaries.is_empty() {
            Ok(0.0)
        } else {
            boundary_discontinuity(p.view(), &boundaries)
        }
    };

    let loss = |p: &Array2<f64>| total_loss(p.view(), target.view(), table, spec, &batch, weights, tau);
    let initial_boundary_discontinuity = discontinuity(&pred)?;
    let mut current = loss(&pred)?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(current.total);
    let mut step_lr = lr;

    for _ in 0..steps {
        let grad = loss_gradient(pred.view(), target.view(), table, spec, &batch, weights, tau)?;
        let span = spec.span();
        // halve the step until the loss does not increase; keep `pred` if none works
        for _ in 0..MAX_HALVINGS {
            let mut candidate = pred.clone();
            candidate
                .slice_mut(s![span.clone(), ..])
                .scaled_add(-step_lr, &grad.slice(s![span.clone(), ..]));
            let next = loss(&candidate)?;
            if next.total <= current.total {
                pred = candidate;
                current = next;
                break;
            }
            step_lr *= 0.5;
        }
        trajectory.push(current.total);
    }

    Ok(ToyRunResult {
        trajectory,
        final_loss: current,
        initial_boundary_discontinuity,
        final_boundary_discontinuity: discontinuity(&pred)?,
        seed,
        steps,
        learning_rate: lr,
        final_learning_rate: step_lr,
        prediction: pred,
    })
}

/// A smooth synthetic utterance with word/phoneme alignment.
#[derive(Debug, Clone)]
pub struct SyntheticUtterance {
    pub mel: MelSpectrogram,
    pub table: AlignmentTable,
}

/// Slowly varying ramps plus a gentle sinusoid per bin, cut into words of
/// 3–8 frames (1–3 phonemes each) with occasional short pauses.
pub fn synthetic_utterance(n_words: usize, n_mels: usize, seed: u64) -> Result<SyntheticUtterance> {
    if n_words == 0 || n_mels == 0 {
        return Err(Error::InvalidArgument("need at least one word and one bin".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f2p: Vec<Option<usize>> = Vec::new();
    let mut f2w: Vec<Option<usize>> = Vec::new();
    let mut n_phonemes = 0;
    for w in 0..n_words {
        if w > 0 && rng.random_bool(0.25) {
            let pause = rng.random_range(1..=2);
            f2p.extend(std::iter::repeat_n(None, pause));
            f2w.extend(std::iter::repeat_n(None, pause));
        }
        let len = rng.random_range(3..=8usize);
        let phones = rng.random_range(1..=len.min(3));
        // split `len` frames into `phones` non-empty pieces
        let mut cuts: Vec<usize> = (1..len).collect();
        for i in 0..phones - 1 {
            let j = rng.random_range(i..cuts.len());
            cuts.swap(i, j);
        }
        let mut cuts: Vec<usize> = cuts[..phones - 1].to_vec();
        cuts.sort_unstable();
        cuts.push(len);
        let mut at = 0;
        for cut in cuts {
            f2p.extend(std::iter::repeat_n(Some(n_phonemes), cut - at));
            f2w.extend(std::iter::repeat_n(Some(w), cut - at));
            n_phonemes += 1;
            at = cut;
        }
    }
    let n_frames = f2w.len();
    let base: Vec<f64> = (0..n_mels).map(|_| rng.random_range(-6.0..-1.0)).collect();
    let slope: Vec<f64> = (0..n_mels).map(|_| rng.random_range(-2.0..2.0)).collect();
    let amp: Vec<f64> = (0..n_mels).map(|_| rng.random_range(0.0..0.6)).collect();
    let period: Vec<f64> = (0..n_mels).map(|_| rng.random_range(12.0..40.0)).collect();
    let data = Array2::from_shape_fn((n_frames, n_mels), |(t, b)| {
        let x = t as f64;
        base[b] + slope[b] * x / n_frames as f64 + amp[b] * (2.0 * std::f64::consts::PI * x / period[b]).sin()
    });
    let cfg = MelConfig {
        n_mels: n_mels as u32,
        ..MelConfig::default()
    };
    let mel = MelSpectrogram::from_f64(data.view(), cfg)?;
    let table = AlignmentTable::from_frames(
        (0..n_phonemes).map(|p| format!("p{p}")).collect(),
        (0..n_words).map(|w| format!("w{w}")).collect(),
        f2p,
        f2w,
    )?;
    Ok(SyntheticUtterance { mel, table })
}
