//! RIFF/WAVE output of rendered stereo buffers.

use serde::{Deserialize, Serialize};
use std::io::{Seek, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    /// 16-bit signed PCM.
    S16,
    /// 32-bit IEEE float.
    #[default]
    F32,
}

impl FromStr for WavFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s16" | "i16" | "16" => Ok(WavFormat::S16),
            "f32" | "float" | "32f" => Ok(WavFormat::F32),
            other => Err(format!("unknown wav format `{other}` (s16|f32)")),
        }
    }
}

fn spec(sample_rate: u32, format: WavFormat) -> hound::WavSpec {
    let (bits_per_sample, sample_format) = match format {
        WavFormat::S16 => (16, hound::SampleFormat::Int),
        WavFormat::F32 => (32, hound::SampleFormat::Float),
    };
    hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample,
        sample_format,
    }
}

#[inline]
pub fn to_s16(x: f32) -> i16 {
    (x.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16
}

pub fn write_wav_to<W: Write + Seek>(
    writer: W,
    frames: &[[f32; 2]],
    sample_rate: u32,
    format: WavFormat,
) -> Result<(), hound::Error> {
    let mut w = hound::WavWriter::new(writer, spec(sample_rate, format))?;
    for f in frames {
        for &s in f {
            match format {
                WavFormat::S16 => w.write_sample(to_s16(s))?,
                WavFormat::F32 => w.write_sample(s)?,
            }
        }
    }
    w.finalize()
}

pub fn write_wav(
    path: &Path,
    frames: &[[f32; 2]],
    sample_rate: u32,
    format: WavFormat,
) -> Result<(), hound::Error> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_wav_to(file, frames, sample_rate, format)
}
