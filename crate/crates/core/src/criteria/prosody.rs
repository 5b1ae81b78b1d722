//! Prosody embeddings and the contrastive global prosody consistency loss.

use std::io::{Read, Write};
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingSource {
    /// Statistics pooling computed by [`prosody_extract_standin`].
    StandIn,
    /// Supplied from outside, e.g. a trained style encoder.
    External,
}

/// A non-zero, finite prosody vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyEmbedding {
    vector: Array1<f64>,
    source: EmbeddingSource,
}

impl ProsodyEmbedding {
    pub fn new(vector: Array1<f64>, source: EmbeddingSource) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::InvalidArgument("embedding has dimension 0".into()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(Self { vector, source })
    }

    pub fn external(values: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(values), EmbeddingSource::External)
    }

    pub fn vector(&self) -> &Array1<f64> {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    /// Same direction, multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.vector * factor, self.source)
    }
}

fn region(mel: ArrayView2<'_, f64>, span: Option<Range<usize>>) -> Result<ArrayView2<'_, f64>> {
    let span = span.unwrap_or(0..mel.nrows());
    if span.start >= span.end || span.end > mel.nrows() {
        return Err(Error::EmptyRegion(span));
    }
    Ok(mel.slice_move(s![span, ..]))
}

/// Per-bin mean followed by per-bin population standard deviation.
pub fn pooled_statistics(mel: ArrayView2<'_, f64>, span: Option<Range<usize>>) -> Result<Array1<f64>> {
    let frames = region(mel, span)?;
    let n = frames.nrows() as f64;
    let bins = frames.ncols();
    let mut out = Array1::zeros(2 * bins);
    for (b, col) in frames.columns().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        out[b] = mean;
        out[bins + b] = var.sqrt();
    }
    Ok(out)
}

/// Deterministic stand-in for a learned style encoder: L2-normalised
/// mean‖std pooling over `span` (the whole spectrogram when `None`).
pub fn prosody_extract_standin(
    mel: ArrayView2<'_, f64>,
    span: Option<Range<usize>>,
) -> Result<ProsodyEmbedding> {
    let raw = pooled_statistics(mel, span)?;
    let norm = raw.dot(&raw).sqrt();
    let vector = if norm > 0.0 {
        raw / norm
    } else {
        let mut e1 = Array1::zeros(raw.len());
        e1[0] = 1.0;
        e1
    };
    ProsodyEmbedding::new(vector, EmbeddingSource::StandIn)
}

pub fn cosine_sim(a: &ProsodyEmbedding, b: &ProsodyEmbedding) -> Result<f64> {
    cosine(a.vector(), b.vector())
}

fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("embedding dims {} vs {}", a.len(), b.len())));
    }
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

fn check_batch(masked: &[ProsodyEmbedding], utterances: &[ProsodyEmbedding], tau: f64) -> Result<()> {
    if masked.len() != utterances.len() {
        return Err(Error::Shape(format!(
            "{} masked-region embeddings vs {} utterance embeddings",
            masked.len(),
            utterances.len()
        )));
    }
    if masked.len() < 2 {
        return Err(Error::BatchTooSmall(masked.len()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::BadTemperature(tau));
    }
    Ok(())
}

/// Row `i` of the similarity logits, `sim(m_i, u_k) / τ` for every `k`.
fn logits(m: &ProsodyEmbedding, utterances: &[ProsodyEmbedding], tau: f64) -> Result<Vec<f64>> {
    utterances
        .iter()
        .map(|u| cosine_sim(m, u).map(|s| s / tau))
        .collect()
}

/// `−log softmax(row)[pos]` with the row maximum subtracted first.
fn row_loss(row: &[f64], pos: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|s| (s - max).exp()).sum();
    max + sum.ln() - row[pos]
}

/// InfoNCE over a batch: each masked region is pulled towards its own
/// utterance and pushed from the other utterances in the batch.
pub fn cgpc_loss(masked: &[ProsodyEmbedding], utterances: &[ProsodyEmbedding], tau: f64) -> Result<f64> {
    check_batch(masked, utterances, tau)?;
    let mut total = 0.0;
    for (i, m) in masked.iter().enumerate() {
        total += row_loss(&logits(m, utterances, tau)?, i);
    }
    Ok(total)
}

/// Gradient of row `row`'s loss term with respect to the raw (unnormalised)
/// statistics vector `raw` from which `masked[row]` was derived.
pub(crate) fn cgpc_row_gradient(
    raw: &Array1<f64>,
    row: usize,
    utterances: &[ProsodyEmbedding],
    tau: f64,
) -> Result<Array1<f64>> {
    let norm = raw.dot(raw).sqrt();
    if norm == 0.0 {
        // stand-in substituted a constant unit vector
        return Ok(Array1::zeros(raw.len()));
    }
    let sims = utterances
        .iter()
        .map(|u| cosine(raw, u.vector()))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = sims.iter().map(|s| s / tau).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = weights.iter().sum();

    let mut grad = Array1::zeros(raw.len());
    for (k, u) in utterances.iter().enumerate() {
        let coeff = (weights[k] / z - if k == row { 1.0 } else { 0.0 }) / tau;
        let u_norm = u.vector().dot(u.vector()).sqrt();
        // d cos(v, u) / dv = u / (|u||v|) − cos · v / |v|²
        grad.scaled_add(coeff / (u_norm * norm), u.vector());
        grad.scaled_add(-coeff * sims[k] / (norm * norm), raw);
    }
    Ok(grad)
}

/// Chains a gradient with respect to [`pooled_statistics`] back to the
/// frames in `span`.
pub(crate) fn pooled_statistics_backward(
    mel: ArrayView2<'_, f64>,
    span: Range<usize>,
    d_stats: &Array1<f64>,
    grad: &mut Array2<f64>,
) -> Result<()> {
    let stats = pooled_statistics(mel, Some(span.clone()))?;
    let bins = mel.ncols();
    let n = span.len() as f64;
    for f in span {
        for b in 0..bins {
            let mean = stats[b];
            let std = stats[bins + b];
            let mut d = d_stats[b] / n;
            if std > 0.0 {
                d += d_stats[bins + b] * (mel[(f, b)] - mean) / (n * std);
            }
            grad[(f, b)] += d;
        }
    }
    Ok(())
}

pub const PROS_MAGIC: &[u8; 4] = b"PROS";

/// `"PROS" | dim u32 | f32[dim]`, little-endian.
pub fn write_prosody<W: Write>(emb: &ProsodyEmbedding, mut sink: W) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * emb.dim());
    buf.extend_from_slice(PROS_MAGIC);
    buf.extend_from_slice(&(emb.dim() as u32).to_le_bytes());
    for v in emb.vector() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_prosody<R: Read>(mut source: R) -> Result<ProsodyEmbedding> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let fmt = |offset: usize, msg: &str| Error::Format { offset: offset as u64, msg: msg.into() };
    if bytes.len() < 4 {
        return Err(fmt(bytes.len(), "truncated magic"));
    }
    if &bytes[..4] != PROS_MAGIC {
        return Err(fmt(0, "bad magic"));
    }
    if bytes.len() < 8 {
        return Err(fmt(bytes.len(), "truncated dimension"));
    }
    let dim = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if dim == 0 {
        return Err(fmt(4, "dimension 0"));
    }
    let expected = 8 + 4 * dim;
    if bytes.len() < expected {
        return Err(fmt(bytes.len(), "truncated payload"));
    }
    if bytes.len() > expected {
        return Err(fmt(expected, "trailing bytes"));
    }
    let values: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(fmt(8 + 4 * i, "non-finite value"));
    }
    ProsodyEmbedding::external(values).map_err(|e| match e {
        Error::ZeroVector => fmt(8, "all-zero embedding"),
        other => other,
    })
}
