//! MELF: little-endian binary container for a [`MelSpectrogram`].
//!
//! ```text
//! "MELF" | version u16 | n_frames u32 | n_mels u32 | sample_rate u32 | hop u32
//!        | n_fft u32 | win u32 | fmin f32 | fmax f32 | log_floor f32
//!        | data f32[n_frames * n_mels] (row-major)
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::{MelConfig, MelSpectrogram};
use crate::error::{Error, Result};

pub const MELF_MAGIC: &[u8; 4] = b"MELF";
pub const MELF_VERSION: u16 = 1;
pub const MELF_HEADER_LEN: usize = 4 + 2 + 6 * 4 + 3 * 4;

pub fn write_mel<W: Write>(mel: &MelSpectrogram, mut sink: W) -> Result<()> {
    let cfg = mel.config();
    let mut buf = Vec::with_capacity(MELF_HEADER_LEN + mel.data().len() * 4);
    buf.extend_from_slice(MELF_MAGIC);
    buf.extend_from_slice(&MELF_VERSION.to_le_bytes());
    let n_frames = u32::try_from(mel.n_frames())
        .map_err(|_| Error::InvalidArgument("too many frames for MELF".into()))?;
    for v in [
        n_frames,
        cfg.n_mels,
        cfg.sample_rate_hz,
        cfg.hop_size,
        cfg.n_fft,
        cfg.win_size,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [cfg.fmin_hz, cfg.fmax_hz, cfg.log_floor] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in mel.data().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("truncated while reading {what}"),
            });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        self.take::<2>(what).map(u16::from_le_bytes)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        self.take::<4>(what).map(f32::from_le_bytes)
    }
}

pub fn read_mel<R: Read>(mut source: R) -> Result<MelSpectrogram> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };

    let magic = cur.take::<4>("magic")?;
    if &magic != MELF_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {:?}", String::from_utf8_lossy(&magic)),
        });
    }
    let version = cur.u16("version")?;
    if version != MELF_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let n_frames = cur.u32("n_frames")? as usize;
    let config_offset = cur.pos;
    let n_mels = cur.u32("n_mels")?;
    let sample_rate_hz = cur.u32("sample_rate")?;
    let hop_size = cur.u32("hop")?;
    let n_fft = cur.u32("n_fft")?;
    let win_size = cur.u32("win")?;
    let fmin_hz = cur.f32("fmin")?;
    let fmax_hz = cur.f32("fmax")?;
    let log_floor = cur.f32("log_floor")?;
    let config = MelConfig {
        sample_rate_hz,
        n_fft,
        hop_size,
        win_size,
        n_mels,
        fmin_hz,
        fmax_hz,
        log_floor,
    };
    config.validate().map_err(|e| Error::Format {
        offset: config_offset as u64,
        msg: format!("invalid config: {e}"),
    })?;

    let count = n_frames
        .checked_mul(n_mels as usize)
        .ok_or_else(|| Error::Format {
            offset: 6,
            msg: "n_frames * n_mels overflows".into(),
        })?;
    let needed = count.checked_mul(4).and_then(|b| b.checked_add(cur.pos));
    match needed {
        Some(n) if n <= bytes.len() => {}
        _ => {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                msg: format!("truncated payload: expected {count} f32 values"),
            })
        }
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let at = cur.pos;
        let v = cur.f32("data")?;
        if !v.is_finite() {
            return Err(Error::Format {
                offset: at as u64,
                msg: "non-finite value".into(),
            });
        }
        data.push(v);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            offset: cur.pos as u64,
            msg: format!("{} trailing bytes", bytes.len() - cur.pos),
        });
    }
    let data = Array2::from_shape_vec((n_frames, n_mels as usize), data)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(MelSpectrogram::from_parts_unchecked(data, config))
}
