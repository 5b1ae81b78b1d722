//! Reconstruction losses over the masked span: MAE and 1 − SSIM.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// SSIM window edge; shrinks to the span size when the span is smaller.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_MIN_RANGE: f64 = 1e-6;

fn span_views<'a>(
    pred: ArrayView2<'a, f64>,
    gt: ArrayView2<'a, f64>,
    span: &Range<usize>,
) -> Result<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs ground truth {:?}", pred.dim(), gt.dim())));
    }
    if span.start >= span.end || span.end > pred.nrows() || pred.ncols() == 0 {
        return Err(Error::EmptyRegion(span.clone()));
    }
    Ok((
        pred.slice_move(s![span.clone(), ..]),
        gt.slice_move(s![span.clone(), ..]),
    ))
}

pub fn mae_loss(pred: ArrayView2<'_, f64>, gt: ArrayView2<'_, f64>, span: Range<usize>) -> Result<f64> {
    let (p, g) = span_views(pred, gt, &span)?;
    let sum: f64 = p.iter().zip(g.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / p.len() as f64)
}

pub(crate) fn accumulate_mae_gradient(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    span: Range<usize>,
    scale: f64,
    grad: &mut Array2<f64>,
) -> Result<()> {
    let (p, g) = span_views(pred, gt, &span)?;
    let per_entry = scale / p.len() as f64;
    let mut out = grad.slice_mut(s![span, ..]);
    for ((o, a), b) in out.iter_mut().zip(p.iter()).zip(g.iter()) {
        let d = a - b;
        *o += per_entry * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
    }
    Ok(())
}

struct SsimParams {
    win_rows: usize,
    win_cols: usize,
    c1: f64,
    c2: f64,
}

fn ssim_params(gt: ArrayView2<'_, f64>) -> SsimParams {
    let (lo, hi) = gt
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = (hi - lo).max(SSIM_MIN_RANGE);
    SsimParams {
        win_rows: SSIM_WINDOW.min(gt.nrows()),
        win_cols: SSIM_WINDOW.min(gt.ncols()),
        c1: (SSIM_K1 * range).powi(2),
        c2: (SSIM_K2 * range).powi(2),
    }
}

/// Mean SSIM over all valid windows of `x` against `y`; optionally the
/// gradient of that mean with respect to `x`.
fn mean_ssim(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, want_grad: bool) -> (f64, Option<Array2<f64>>) {
    let p = ssim_params(y);
    let rows = x.nrows() - p.win_rows + 1;
    let cols = x.ncols() - p.win_cols + 1;
    let n = (p.win_rows * p.win_cols) as f64;
    let n_windows = (rows * cols) as f64;
    let mut grad = want_grad.then(|| Array2::zeros(x.dim()));
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let wx = x.slice(s![r..r + p.win_rows, c..c + p.win_cols]);
            let wy = y.slice(s![r..r + p.win_rows, c..c + p.win_cols]);
            let mx = wx.sum() / n;
            let my = wy.sum() / n;
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut cov = 0.0;
            for (a, b) in wx.iter().zip(wy.iter()) {
                vx += (a - mx) * (a - mx);
                vy += (b - my) * (b - my);
                cov += (a - mx) * (b - my);
            }
            vx /= n;
            vy /= n;
            cov /= n;
            let num_l = 2.0 * mx * my + p.c1;
            let num_c = 2.0 * cov + p.c2;
            let den_l = mx * mx + my * my + p.c1;
            let den_c = vx + vy + p.c2;
            let num = num_l * num_c;
            let den = den_l * den_c;
            total += num / den;

            if let Some(g) = grad.as_mut() {
                // S = A·B / (C·D) with A = num_l, B = num_c, C = den_l, D = den_c
                let mut gw = g.slice_mut(s![r..r + p.win_rows, c..c + p.win_cols]);
                for ((o, a), b) in gw.iter_mut().zip(wx.iter()).zip(wy.iter()) {
                    let da = 2.0 * my / n;
                    let db = 2.0 * (b - my) / n;
                    let dc = 2.0 * mx / n;
                    let dd = 2.0 * (a - mx) / n;
                    let d_num = da * num_c + num_l * db;
                    let d_den = dc * den_c + den_l * dd;
                    *o += (d_num * den - num * d_den) / (den * den) / n_windows;
                }
            }
        }
    }
    (total / n_windows, grad)
}

/// `1 − mean SSIM` over the span treated as a `frames × bins` image.
pub fn ssim_loss(pred: ArrayView2<'_, f64>, gt: ArrayView2<'_, f64>, span: Range<usize>) -> Result<f64> {
    let (p, g) = span_views(pred, gt, &span)?;
    Ok(1.0 - mean_ssim(p, g, false).0)
}

pub(crate) fn accumulate_ssim_gradient(
    pred: ArrayView2<'_, f64>,
    gt: ArrayView2<'_, f64>,
    span: Range<usize>,
    scale: f64,
    grad: &mut Array2<f64>,
) -> Result<()> {
    let (p, g) = span_views(pred, gt, &span)?;
    let (_, d) = mean_ssim(p, g, true);
    if let Some(d) = d {
        grad.slice_mut(s![span, ..]).scaled_add(-scale, &d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(rows: usize, cols: usize, k: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(i, j)| ((i * 13 + j * 7 + k) % 11) as f64 * 0.37 - 1.2)
    }

    #[test]
    fn identical_inputs_are_exactly_zero() {
        let g = pattern(16, 10, 0);
        assert_eq!(mae_loss(g.view(), g.view(), 2..14).unwrap(), 0.0);
        assert_eq!(ssim_loss(g.view(), g.view(), 2..14).unwrap(), 0.0);
        // spans narrower than the window
        assert_eq!(ssim_loss(g.view(), g.view(), 5..7).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_mae() {
        let g = pattern(8, 4, 1);
        let p = &g + 1.0;
        assert!((mae_loss(p.view(), g.view(), 0..8).unwrap() - 1.0).abs() < 1e-15);
        assert!((mae_loss(p.view(), g.view(), 3..4).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_stays_in_range() {
        let g = pattern(16, 16, 3);
        for p in [-&g, &g * 0.5 + 3.0, pattern(16, 16, 5)] {
            let l = ssim_loss(p.view(), g.view(), 0..16).unwrap();
            assert!(l > 0.0 && l <= 2.0, "{l}");
        }
    }

    #[test]
    fn errors() {
        let a = pattern(6, 4, 0);
        let b = pattern(6, 5, 0);
        assert!(matches!(mae_loss(a.view(), b.view(), 0..6), Err(Error::Shape(_))));
        assert!(matches!(ssim_loss(a.view(), a.view(), 3..3), Err(Error::EmptyRegion(_))));
        assert!(matches!(ssim_loss(a.view(), a.view(), 3..9), Err(Error::EmptyRegion(_))));
    }
}
