//! Waveform container plus the I/O and conditioning helpers around it.

mod manifest;
mod resample;
mod text;
mod wav;

pub use manifest::{read_manifest, write_manifest, DatasetEntry, Split};
pub use resample::{decimate, upsample, Resampler, CUTOFF, KAISER_BETA, TAPS_PER_PHASE};
pub use text::{read_csv, write_csv};
pub use wav::{quantize, read_wav, write_wav};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("waveform is empty")]
    Empty,
    #[error("cannot normalize an all-zero waveform")]
    AllZero,
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {channels} channel(s), {bits} bits, {format}")]
    UnsupportedEncoding { channels: u16, bits: u16, format: String },
    #[error("WAV payload is truncated")]
    Truncated,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no sample rate given and no '# rate=' header present")]
    MissingRate,
    #[error("downsampling from {from} Hz to {to} Hz is not supported")]
    Downsample { from: u32, to: u32 },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WaveformError> = std::result::Result<T, E>;

/// Uniformly sampled amplitude series. Samples are nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
    start_time: Option<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(WaveformError::ZeroRate);
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(WaveformError::NonFinite { index });
        }
        Ok(Self { samples, sample_rate, source_id: String::new(), start_time: None })
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn with_start_time(mut self, t: f64) -> Self {
        self.start_time = Some(t);
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn start_time(&self) -> Option<f64> {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Copy of `range` as a new waveform with the same rate and provenance.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Waveform {
        let start = range.start;
        Waveform {
            samples: self.samples[range].to_vec(),
            sample_rate: self.sample_rate,
            source_id: self.source_id.clone(),
            start_time: self.start_time.map(|t| t + start as f64 / self.sample_rate as f64),
        }
    }

    pub(crate) fn map_samples(&self, samples: Vec<f64>, sample_rate: u32) -> Waveform {
        Waveform { samples, sample_rate, source_id: self.source_id.clone(), start_time: self.start_time }
    }
}

/// Peak normalization: scales so that `max |x| == 1.0`.
pub fn normalize(w: &Waveform) -> Result<Waveform> {
    if w.is_empty() {
        return Err(WaveformError::Empty);
    }
    let peak = w.peak();
    if peak == 0.0 {
        return Err(WaveformError::AllZero);
    }
    let samples = w.samples.iter().map(|&x| (x / peak).clamp(-1.0, 1.0)).collect();
    Ok(w.map_samples(samples, w.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(Waveform::new(vec![0.0], 0), Err(WaveformError::ZeroRate)));
        assert!(matches!(Waveform::new(vec![0.0, f64::NAN], 10), Err(WaveformError::NonFinite { index: 1 })));
    }

    #[test]
    fn normalize_examples() {
        let w = Waveform::new(vec![0.5, -0.25], 100).unwrap();
        assert_eq!(normalize(&w).unwrap().samples(), &[1.0, -0.5]);
        let w = Waveform::new(vec![1.0], 100).unwrap();
        assert_eq!(normalize(&w).unwrap().samples(), &[1.0]);
        let w = Waveform::new(vec![0.0, 0.0], 100).unwrap();
        assert!(matches!(normalize(&w), Err(WaveformError::AllZero)));
        let w = Waveform::new(vec![], 100).unwrap();
        assert!(matches!(normalize(&w), Err(WaveformError::Empty)));
    }

    proptest! {
        #[test]
        fn normalize_peak_is_one_and_idempotent(xs in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            prop_assume!(xs.iter().any(|x| *x != 0.0));
            let w = Waveform::new(xs, 200).unwrap();
            let n = normalize(&w).unwrap();
            prop_assert_eq!(n.peak(), 1.0);
            let nn = normalize(&n).unwrap();
            prop_assert_eq!(n, nn);
        }
    }
}
