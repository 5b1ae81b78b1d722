//! Fluency-aware training criteria.
//!
//! The total objective for a prediction `pred` of ground truth `gt` under a
//! word-level mask is
//!
//! ```text
//! total = γ · (MAE + (1 − SSIM)) + α · L_HLAC + β · L_CGPC
//! ```
//!
//! where MAE and SSIM are taken over the masked span, `L_HLAC` compares
//! boundary deltas of `pred` and `gt` at frame, phoneme and word level, and
//! `L_CGPC` is an InfoNCE loss over prosody embeddings in a batch whose
//! first item is `pred` itself.

mod hlac;
mod prosody;
mod recon;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentTable;
use crate::error::{Error, Result};
use crate::masking::MaskSpec;

pub use hlac::{
    boundary_delta, hlac_level_loss, hlac_loss, hlac_side_loss, BoundaryDelta, HlacBreakdown,
    Level, Side,
};
pub use prosody::{
    cgpc_loss, cosine_sim, pooled_statistics, prosody_extract_standin, read_prosody,
    write_prosody, EmbeddingSource, ProsodyEmbedding, PROS_MAGIC,
};
pub use recon::{mae_loss, ssim_loss, SSIM_K1, SSIM_K2, SSIM_MIN_RANGE, SSIM_WINDOW};

pub const DEFAULT_TAU: f64 = 0.1;

/// Mixing weights: α for HLAC, β for CGPC, γ for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// The other utterances in a contrastive batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    /// Embedding of that utterance's predicted masked region.
    pub masked: ProsodyEmbedding,
    /// Embedding of that utterance's full ground truth.
    pub utterance: ProsodyEmbedding,
}

impl BatchItem {
    /// Stand-in embeddings of an utterance and a region of it.
    pub fn from_standin(mel: ArrayView2<'_, f64>, span: std::ops::Range<usize>) -> Result<Self> {
        Ok(Self {
            masked: prosody_extract_standin(mel, Some(span))?,
            utterance: prosody_extract_standin(mel, None)?,
        })
    }
}

/// Negatives for the CGPC term. The item being scored is always batch index 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchContext {
    pub others: Vec<BatchItem>,
}

impl BatchContext {
    pub fn new(others: Vec<BatchItem>) -> Self {
        Self { others }
    }

    pub fn batch_size(&self) -> usize {
        self.others.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub hlac_frame_l: f64,
    pub hlac_frame_r: f64,
    pub hlac_phoneme_l: f64,
    pub hlac_phoneme_r: f64,
    pub hlac_word_l: f64,
    pub hlac_word_r: f64,
    pub hlac_total: f64,
    pub cgpc: f64,
    pub mae: f64,
    pub ssim_loss: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossBreakdown {
    fn assemble(hlac: HlacBreakdown, cgpc: f64, mae: f64, ssim_loss: f64, weights: LossWeights) -> Self {
        let hlac_total = hlac.total();
        Self {
            hlac_frame_l: hlac.frame_left,
            hlac_frame_r: hlac.frame_right,
            hlac_phoneme_l: hlac.phoneme_left,
            hlac_phoneme_r: hlac.phoneme_right,
            hlac_word_l: hlac.word_left,
            hlac_word_r: hlac.word_right,
            hlac_total,
            cgpc,
            mae,
            ssim_loss,
            total: weights.gamma * (mae + ssim_loss) + weights.alpha * hlac_total + weights.beta * cgpc,
            weights,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Embeddings for the whole batch with `pred`'s masked region first.
fn batch_embeddings(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    spec: &MaskSpec,
    batch: &BatchContext,
) -> Result<(Vec<ProsodyEmbedding>, Vec<ProsodyEmbedding>)> {
    let mut masked = vec![prosody_extract_standin(pred, Some(spec.span()))?];
    let mut utterances = vec![prosody_extract_standin(gt, None)?];
    for item in &batch.others {
        masked.push(item.masked.clone());
        utterances.push(item.utterance.clone());
    }
    Ok((masked, utterances))
}

/// CGPC is skipped (reported as 0) only when β = 0 and no negatives exist.
fn cgpc_active(weights: &LossWeights, batch: &BatchContext) -> bool {
    weights.beta != 0.0 || !batch.others.is_empty()
}

pub fn total_loss(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    batch: &BatchContext,
    weights: &LossWeights,
    tau: f64,
) -> Result<LossBreakdown> {
    let (_, hlac) = hlac_loss(pred, gt, table, spec)?;
    let mae = mae_loss(pred, gt, spec.span())?;
    let ssim = ssim_loss(pred, gt, spec.span())?;
    let cgpc = if cgpc_active(weights, batch) {
        let (masked, utterances) = batch_embeddings(pred, gt, spec, batch)?;
        cgpc_loss(&masked, &utterances, tau)?
    } else {
        0.0
    };
    Ok(LossBreakdown::assemble(hlac, cgpc, mae, ssim, *weights))
}

/// Analytic `∂ total / ∂ pred`, zero outside the masked span.
///
/// `|a − b|` uses the subgradient `sign(a − b)` with `sign(0) = 0`.
pub fn loss_gradient(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    table: &AlignmentTable,
    spec: &MaskSpec,
    batch: &BatchContext,
    weights: &LossWeights,
    tau: f64,
) -> Result<Array2<f64>> {
    let mut grad = Array2::zeros(pred.dim());
    let span = spec.span();
    if weights.gamma != 0.0 {
        recon::accumulate_mae_gradient(pred, gt, span.clone(), weights.gamma, &mut grad)?;
        recon::accumulate_ssim_gradient(pred, gt, span.clone(), weights.gamma, &mut grad)?;
    }
    if weights.alpha != 0.0 {
        hlac::accumulate_hlac_gradient(pred, gt, table, spec, weights.alpha, &mut grad)?;
    }
    if weights.beta != 0.0 {
        let (_, utterances) = batch_embeddings(pred, gt, spec, batch)?;
        if utterances.len() < 2 {
            return Err(Error::BatchTooSmall(utterances.len()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::BadTemperature(tau));
        }
        let raw = pooled_statistics(pred, Some(span.clone()))?;
        let d_raw = prosody::cgpc_row_gradient(&raw, 0, &utterances, tau)? * weights.beta;
        prosody::pooled_statistics_backward(pred, span, &d_raw, &mut grad)?;
    }
    Ok(grad)
}

/// Central differences `(f(x + h·e) − f(x − h·e)) / 2h` for every coordinate.
pub fn finite_diff_oracle<F>(f: F, x: ArrayView2<'_, f64>, h: f64) -> Array2<f64>
where
    F: Fn(ArrayView2<'_, f64>) -> f64,
{
    finite_diff_oracle_rows(f, x, h, 0..x.nrows())
}

/// [`finite_diff_oracle`] restricted to rows in `rows`; other entries are 0.
pub fn finite_diff_oracle_rows<F>(f: F, x: ArrayView2<'_, f64>, h: f64, rows: std::ops::Range<usize>) -> Array2<f64>
where
    F: Fn(ArrayView2<'_, f64>) -> f64,
{
    let mut probe = x.to_owned();
    let mut out = Array2::zeros(x.dim());
    for r in rows {
        for c in 0..x.ncols() {
            let orig = probe[(r, c)];
            probe[(r, c)] = orig + h;
            let up = f(probe.view());
            probe[(r, c)] = orig - h;
            let down = f(probe.view());
            probe[(r, c)] = orig;
            out[(r, c)] = (up - down) / (2.0 * h);
        }
    }
    out
}
