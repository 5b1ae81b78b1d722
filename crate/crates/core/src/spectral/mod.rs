//! Audio front-end and the mel-spectrogram data model.
//!
//! A [`MelSpectrogram`] is a `frames × n_mels` matrix of natural-log mel
//! energies. Row `i` corresponds to time `i · hop / sr` seconds (the centre of
//! the analysis window, since the signal is reflect-padded by `n_fft / 2`).

mod mel;
mod melf;
mod wav;

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mel::{compute_mel, mel_center_frequencies, mel_filterbank, hz_to_mel, mel_to_hz};
pub use melf::{read_mel, write_mel, MELF_HEADER_LEN, MELF_MAGIC, MELF_VERSION};
pub use wav::{read_wav, read_wav_file};

/// Mono PCM audio normalised to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// STFT and filterbank parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate_hz: u32,
    pub n_fft: u32,
    pub hop_size: u32,
    pub win_size: u32,
    pub n_mels: u32,
    pub fmin_hz: f32,
    pub fmax_hz: f32,
    pub log_floor: f32,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 22050,
            n_fft: 1024,
            hop_size: 256,
            win_size: 1024,
            n_mels: 80,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive".into());
        }
        if !self.n_fft.is_power_of_two() {
            return bad(format!("n_fft {} is not a power of two", self.n_fft));
        }
        if !(0 < self.hop_size && self.hop_size <= self.win_size && self.win_size <= self.n_fft) {
            return bad(format!(
                "need 0 < hop ({}) <= win ({}) <= n_fft ({})",
                self.hop_size, self.win_size, self.n_fft
            ));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        let nyquist = self.sample_rate_hz as f32 / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= sr/2 ({nyquist})",
                self.fmin_hz, self.fmax_hz
            ));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return bad(format!("log_floor {} must be a small positive value", self.log_floor));
        }
        Ok(())
    }

    /// Frame count produced by [`compute_mel`] for `n_samples` input samples.
    pub fn frames_for_samples(&self, n_samples: usize) -> usize {
        n_samples / self.hop_size as usize + 1
    }

    /// Seconds per frame step.
    pub fn frame_period_secs(&self) -> f64 {
        self.hop_size as f64 / self.sample_rate_hz as f64
    }

    /// Time of row `i`.
    pub fn frame_time(&self, i: usize) -> f64 {
        i as f64 * self.hop_size as f64 / self.sample_rate_hz as f64
    }
}

/// Log-mel spectrogram, `frames × n_mels`, with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Array2<f32>,
    config: MelConfig,
}

impl MelSpectrogram {
    pub fn new(data: Array2<f32>, config: MelConfig) -> Result<Self> {
        if data.ncols() != config.n_mels as usize {
            return Err(Error::Shape(format!(
                "data has {} bins but config says n_mels = {}",
                data.ncols(),
                config.n_mels
            )));
        }
        if let Some(((r, c), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("entry ({r}, {c}) is not finite")));
        }
        Ok(Self { data, config })
    }

    /// Builds a spectrogram from f64 values, rounding to f32.
    pub fn from_f64(data: ArrayView2<'_, f64>, config: MelConfig) -> Result<Self> {
        Self::new(data.mapv(|v| v as f32), config)
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_mels(&self) -> usize {
        self.data.ncols()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    /// Copy of rows `range`.
    pub fn slice_frames(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.n_frames() {
            return Err(Error::Index(format!(
                "frame range {range:?} outside 0..{}",
                self.n_frames()
            )));
        }
        Ok(Self {
            data: self.data.slice(s![range, ..]).to_owned(),
            config: self.config,
        })
    }

    /// Concatenates spectrograms along time. All parts must share a config.
    pub fn concat(parts: &[&MelSpectrogram]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::EmptyInput("nothing to concatenate".into()))?;
        for p in &parts[1..] {
            if p.config != first.config {
                return Err(Error::ConfigMismatch(
                    "cannot concatenate spectrograms with different configs".into(),
                ));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(Self {
            data,
            config: first.config,
        })
    }

    pub(crate) fn from_parts_unchecked(data: Array2<f32>, config: MelConfig) -> Self {
        debug_assert_eq!(data.ncols(), config.n_mels as usize);
        Self { data, config }
    }
}
