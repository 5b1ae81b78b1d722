use std::f64::consts::{LN_10, PI};

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::spectral::MelSpectrogram;

pub const DEFAULT_N_CEPS: usize = 13;

/// `(10 / ln 10) · √2`
pub const MCD_SCALE: f64 = 10.0 / LN_10 * std::f64::consts::SQRT_2;

/// Orthonormal DCT-II basis rows `1..=n_ceps` for length-`n` inputs.
fn dct_rows(n: usize, n_ceps: usize) -> Vec<Vec<f64>> {
    let scale = (2.0 / n as f64).sqrt();
    (1..=n_ceps)
        .map(|k| {
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Mel-cepstral distortion in dB between frame-aligned log-mel matrices.
///
/// Cepstra are the orthonormal DCT-II of each log-mel row; `c0` is dropped
/// and coefficients `1..=n_ceps` are compared. No time warping.
pub fn mcd_frames(pred: ArrayView2<'_, f64>, gt: ArrayView2<'_, f64>, n_ceps: usize) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs ground truth {:?}", pred.dim(), gt.dim())));
    }
    if pred.nrows() == 0 {
        return Err(Error::EmptyInput("MCD needs at least one frame".into()));
    }
    let n_mels = pred.ncols();
    if n_ceps == 0 || n_ceps >= n_mels {
        return Err(Error::InvalidArgument(format!("n_ceps {n_ceps} must be in 1..{n_mels}")));
    }
    let basis = dct_rows(n_mels, n_ceps);
    let mut total = 0.0;
    for (p, g) in pred.rows().into_iter().zip(gt.rows()) {
        let diff: Vec<f64> = p.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
        let sq: f64 = basis
            .iter()
            .map(|row| {
                let c: f64 = row.iter().zip(&diff).map(|(w, d)| w * d).sum();
                c * c
            })
            .sum();
        total += sq.sqrt();
    }
    Ok(MCD_SCALE * total / pred.nrows() as f64)
}

pub fn mcd(pred: &MelSpectrogram, gt: &MelSpectrogram, n_ceps: usize) -> Result<f64> {
    mcd_frames(pred.to_f64().view(), gt.to_f64().view(), n_ceps)
}

fn step(mel: ArrayView2<'_, f64>, j: usize) -> f64 {
    mel.row(j)
        .iter()
        .zip(mel.row(j - 1).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Mean L2 jump across the given boundaries divided by the mean jump between
/// all other adjacent frames. A boundary `b` is the pair `(b − 1, b)`;
/// boundaries without both frames are ignored.
pub fn boundary_discontinuity(mel: ArrayView2<'_, f64>, boundaries: &[usize]) -> Result<f64> {
    let n = mel.nrows();
    let mut valid: Vec<usize> = boundaries.iter().copied().filter(|&b| b >= 1 && b < n).collect();
    valid.sort_unstable();
    valid.dedup();
    if valid.is_empty() {
        return Err(Error::EmptyInput("no boundary has frames on both sides".into()));
    }
    let at = valid.iter().map(|&b| step(mel, b)).sum::<f64>() / valid.len() as f64;
    let others: Vec<f64> = (1..n)
        .filter(|j| valid.binary_search(j).is_err())
        .map(|j| step(mel, j))
        .collect();
    let context = if others.is_empty() {
        0.0
    } else {
        others.iter().sum::<f64>() / others.len() as f64
    };
    if at == 0.0 {
        return Ok(0.0);
    }
    Ok(at / context.max(1e-9))
}
