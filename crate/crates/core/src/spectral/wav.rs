use std::io::Read;
use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

/// Reads 16-bit PCM mono WAV. Anything else is rejected.
pub fn read_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let wav = hound::WavReader::new(reader).map_err(|e| Error::Audio(e.to_string()))?;
    let spec = wav.spec();
    if spec.channels != 1 {
        return Err(Error::Audio(format!("expected mono, got {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "expected 16-bit PCM, got {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = wav
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Audio(e.to_string()))?;
    AudioClip::new(samples, spec.sample_rate)
}

pub fn read_wav_file(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = std::fs::File::open(path)?;
    read_wav(std::io::BufReader::new(file))
}
