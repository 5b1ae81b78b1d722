use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioClip, MelConfig, MelSpectrogram};
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `n_mels + 2` filter edge frequencies, evenly spaced on the mel scale.
fn mel_edges_hz(cfg: &MelConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin_hz as f64);
    let hi = hz_to_mel(cfg.fmax_hz as f64);
    let n = cfg.n_mels as usize + 2;
    (0..n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Peak frequency of each triangular filter.
pub fn mel_center_frequencies(cfg: &MelConfig) -> Vec<f64> {
    let edges = mel_edges_hz(cfg);
    edges[1..edges.len() - 1].to_vec()
}

/// `n_mels × (n_fft/2 + 1)` triangular filterbank. Each triangle is scaled by
/// `2 / (f_right - f_left)` so it has unit area in Hz.
pub fn mel_filterbank(cfg: &MelConfig) -> Array2<f64> {
    let n_freqs = cfg.n_fft as usize / 2 + 1;
    let edges = mel_edges_hz(cfg);
    let bin_hz = cfg.sample_rate_hz as f64 / cfg.n_fft as f64;
    let mut fb = Array2::zeros((cfg.n_mels as usize, n_freqs));
    for (m, mut row) in fb.rows_mut().into_iter().enumerate() {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (right - left);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let up = (f - left) / (centre - left);
            let down = (right - f) / (right - centre);
            *w = up.min(down).max(0.0) * norm;
        }
    }
    fb
}

/// Periodic Hann window of `win` samples, zero-padded symmetrically to `n_fft`.
fn padded_window(win: usize, n_fft: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_fft];
    let offset = (n_fft - win) / 2;
    for k in 0..win {
        w[offset + k] = 0.5 - 0.5 * (2.0 * PI * k as f64 / win as f64).cos();
    }
    w
}

/// Index into a signal of length `n` after reflect padding (edge sample not repeated).
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Hann-windowed magnitude STFT, mel filterbank, floor, natural log.
///
/// Produces `len / hop + 1` frames; the signal is reflect-padded by `n_fft / 2`
/// on both sides so frame `i` is centred on sample `i · hop`.
pub fn compute_mel(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    if clip.is_empty() {
        return Err(Error::EmptyInput("audio clip has no samples".into()));
    }
    if clip.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::ConfigMismatch(format!(
            "clip is {} Hz but config expects {} Hz",
            clip.sample_rate_hz(),
            cfg.sample_rate_hz
        )));
    }

    let n_fft = cfg.n_fft as usize;
    let hop = cfg.hop_size as usize;
    let pad = (n_fft / 2) as isize;
    let samples = clip.samples();
    let n = samples.len();
    let n_frames = cfg.frames_for_samples(n);
    let n_freqs = n_fft / 2 + 1;

    let window = padded_window(cfg.win_size as usize, n_fft);
    let fb = mel_filterbank(cfg);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let floor = cfg.log_floor as f64;

    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut mag = vec![0.0; n_freqs];
    let mut out = Array2::<f32>::zeros((n_frames, cfg.n_mels as usize));
    for (frame, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = (frame * hop) as isize - pad;
        for (k, slot) in buf.iter_mut().enumerate() {
            let x = samples[reflect_index(start + k as isize, n)] as f64;
            *slot = Complex::new(x * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf[..n_freqs]) {
            *m = c.norm();
        }
        for (out_v, filt) in row.iter_mut().zip(fb.rows()) {
            let energy: f64 = filt.iter().zip(&mag).map(|(w, m)| w * m).sum();
            *out_v = energy.max(floor).ln() as f32;
        }
    }
    Ok(MelSpectrogram::from_parts_unchecked(out, *cfg))
}
