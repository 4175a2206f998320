//! 16-bit PCM mono WAV encoding.

use super::{Result, Waveform, WaveformError};
use std::io::Cursor;

const FULL_SCALE: f64 = 32768.0;

/// Quantizes one sample to 16-bit PCM: clip to [-1, 1], scale by 32768,
/// round half away from zero, saturate at the int16 range.
pub fn quantize(x: f64) -> i16 {
    let scaled = (x.clamp(-1.0, 1.0) * FULL_SCALE).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn read_wav(bytes: &[u8]) -> Result<Waveform> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_header_error)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(WaveformError::UnsupportedEncoding {
            channels: spec.channels,
            bits: spec.bits_per_sample,
            format: format!("{:?}", spec.sample_format),
        });
    }
    if spec.sample_rate == 0 {
        return Err(WaveformError::MalformedHeader("sample rate is zero".into()));
    }
    let expected = reader.len() as usize;
    let mut samples = Vec::with_capacity(expected);
    for s in reader.into_samples::<i16>() {
        match s {
            Ok(v) => samples.push(v as f64 / FULL_SCALE),
            Err(hound::Error::IoError(_)) => return Err(WaveformError::Truncated),
            Err(e) => return Err(map_header_error(e)),
        }
    }
    if samples.len() != expected {
        return Err(WaveformError::Truncated);
    }
    Waveform::new(samples, spec.sample_rate)
}

fn map_header_error(e: hound::Error) -> WaveformError {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => WaveformError::Truncated,
        hound::Error::IoError(io) => WaveformError::Io(io),
        hound::Error::Unsupported => {
            WaveformError::UnsupportedEncoding { channels: 0, bits: 0, format: "unsupported".into() }
        }
        other => WaveformError::MalformedHeader(other.to_string()),
    }
}

pub fn write_wav(w: &Waveform) -> Result<Vec<u8>> {
    if w.is_empty() {
        return Err(WaveformError::Empty);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * w.len()));
    {
        let mut writer =
            hound::WavWriter::new(&mut cursor, spec).map_err(|e| WaveformError::MalformedHeader(e.to_string()))?;
        let mut i16_writer = writer.get_i16_writer(w.len() as u32);
        for &x in w.samples() {
            i16_writer.write_sample(quantize(x));
        }
        i16_writer.flush().map_err(|e| WaveformError::MalformedHeader(e.to_string()))?;
        writer.finalize().map_err(|e| WaveformError::MalformedHeader(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}
