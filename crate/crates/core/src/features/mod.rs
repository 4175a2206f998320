//! Short-time spectral features: the MFCC chain.
//!
//! pre-emphasis → framing + Hamming → |FFT|² → Mel filterbank → ln → DCT-II.
//! [`FeatureExtractor`] precomputes the window, filterbank, FFT plan and DCT
//! basis for one [`FeatureConfig`] and can be shared across threads.

mod dct;
mod frame;
mod mel;
mod spectrum;

pub use dct::{dct2_truncated, DctBasis};
pub use frame::{frame_signal, hamming_window, pre_emphasis, FrameMatrix};
pub use mel::{apply_filterbank, build_filterbank, hz_to_mel, mel_to_hz, FilterBank};
pub use spectrum::{power_spectrum, SpectrumPlan};

use crate::waveform::Waveform;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("window length {0} is too short (need at least 2)")]
    WindowTooShort(usize),
    #[error("signal of {len} samples is shorter than one frame ({frame} samples)")]
    SignalTooShort { len: usize, frame: usize },
    #[error("nfft {nfft} is smaller than the frame length {frame}")]
    NfftTooSmall { nfft: usize, frame: usize },
    #[error("nfft {0} is not a power of two")]
    NfftNotPowerOfTwo(usize),
    #[error("negative input {0} to a Mel conversion")]
    Negative(f64),
    #[error(
        "{n_filters} filters do not fit in {bins} FFT bins at {sample_rate} Hz; \
         use nfft >= {min_nfft} or fewer filters"
    )]
    FilterbankTooDense { n_filters: usize, bins: usize, sample_rate: u32, min_nfft: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("waveform rate {got} Hz does not match the feature config rate {expected} Hz")]
    RateMismatch { expected: u32, got: u32 },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Output of the chain: cepstra or log filterbank energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    Mfcc,
    LogFilterbank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Pre-emphasis coefficient.
    pub alpha: f64,
    pub frame_len_ms: f64,
    pub stride_ms: f64,
    pub nfft: usize,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub sample_rate: u32,
    /// Energy floor applied before the logarithm.
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            frame_len_ms: 25.0,
            stride_ms: 10.0,
            nfft: 256,
            n_filters: 26,
            n_ceps: 13,
            sample_rate: 1000,
            log_floor: 1e-12,
        }
    }
}

impl FeatureConfig {
    /// 25 ms frames with a 20 ms stride: 0.2 s at 1000 Hz gives 9 × 13.
    pub fn reference(sample_rate: u32) -> Self {
        Self { stride_ms: 20.0, sample_rate, ..Self::default() }
    }

    pub fn frame_len_samples(&self) -> usize {
        (self.frame_len_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn stride_samples(&self) -> usize {
        (self.stride_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    /// Number of frames for a signal of `len` samples (0 if shorter than a frame).
    pub fn frame_count(&self, len: usize) -> usize {
        let l = self.frame_len_samples();
        if len < l {
            0
        } else {
            1 + (len - l) / self.stride_samples()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FeatureError::Config(m));
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1)", self.alpha));
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_filters {
            return bad(format!("need 0 < n_ceps ({}) <= n_filters ({})", self.n_ceps, self.n_filters));
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if !(self.stride_ms > 0.0) || self.stride_samples() == 0 {
            return bad(format!("stride {} ms is less than one sample", self.stride_ms));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        let frame = self.frame_len_samples();
        if frame < 2 {
            return Err(FeatureError::WindowTooShort(frame));
        }
        if !self.nfft.is_power_of_two() {
            return Err(FeatureError::NfftNotPowerOfTwo(self.nfft));
        }
        if self.nfft < frame {
            return Err(FeatureError::NfftTooSmall { nfft: self.nfft, frame });
        }
        Ok(())
    }

    /// `key=value` lines echoed into reports and feature dumps.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("alpha".into(), self.alpha.to_string()),
            ("frame_len_ms".into(), self.frame_len_ms.to_string()),
            ("stride_ms".into(), self.stride_ms.to_string()),
            ("nfft".into(), self.nfft.to_string()),
            ("n_filters".into(), self.n_filters.to_string()),
            ("n_ceps".into(), self.n_ceps.to_string()),
            ("sample_rate".into(), self.sample_rate.to_string()),
            ("log_floor".into(), self.log_floor.to_string()),
        ]
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FeatureError::Dimension(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    /// CSV dump: `#key=value` config echo, a `c0..` header, one frame per row.
    pub fn to_csv(&self, config: &FeatureConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#kind={}",
            match self.kind {
                FeatureKind::Mfcc => "mfcc",
                FeatureKind::LogFilterbank => "log_filterbank",
            }
        );
        for (k, v) in config.echo() {
            let _ = writeln!(out, "#{k}={v}");
        }
        let prefix = match self.kind {
            FeatureKind::Mfcc => "c",
            FeatureKind::LogFilterbank => "e",
        };
        let header: Vec<String> = (0..self.values.cols()).map(|j| format!("{prefix}{j}")).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for row in self.values.iter_rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parses a dump written by [`FeatureMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = FeatureKind::Mfcc;
        let mut cols = None;
        let mut data = Vec::new();
        let mut rows = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if c == "kind=log_filterbank" {
                    kind = FeatureKind::LogFilterbank;
                }
                continue;
            }
            if cols.is_none() {
                cols = Some(line.split(',').count());
                continue;
            }
            let before = data.len();
            for cell in line.split(',') {
                data.push(
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| FeatureError::Dimension(format!("line {}: bad value {cell:?}", i + 1)))?,
                );
            }
            if data.len() - before != cols.unwrap_or(0) {
                return Err(FeatureError::Dimension(format!("line {}: ragged row", i + 1)));
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| FeatureError::Dimension("missing header".into()))?;
        Ok(Self { values: Matrix::from_vec(rows, cols, data)?, kind })
    }
}

/// Precomputed state for running the whole chain under one config.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    window: Vec<f64>,
    spectrum: SpectrumPlan,
    filterbank: FilterBank,
    dct: DctBasis,
}

impl FeatureExtractor {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            window: hamming_window(config.frame_len_samples())?,
            spectrum: SpectrumPlan::new(config.nfft)?,
            filterbank: build_filterbank(config)?,
            dct: DctBasis::new(config.n_filters, config.n_ceps)?,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &FilterBank {
        &self.filterbank
    }

    /// Output shape for a signal of `len` samples.
    pub fn output_shape(&self, len: usize, kind: FeatureKind) -> (usize, usize) {
        let cols = match kind {
            FeatureKind::Mfcc => self.config.n_ceps,
            FeatureKind::LogFilterbank => self.config.n_filters,
        };
        (self.config.frame_count(len), cols)
    }

    pub fn extract(&self, w: &Waveform, kind: FeatureKind) -> Result<FeatureMatrix> {
        if w.sample_rate() != self.config.sample_rate {
            return Err(FeatureError::RateMismatch { expected: self.config.sample_rate, got: w.sample_rate() });
        }
        self.extract_samples(w.samples(), kind)
    }

    /// Same as [`FeatureExtractor::extract`] on a bare slice at the config rate.
    pub fn extract_samples(&self, samples: &[f64], kind: FeatureKind) -> Result<FeatureMatrix> {
        let emphasized = pre_emphasis(samples, self.config.alpha)?;
        let frames = frame::frame_with_window(&emphasized, &self.config, &self.window)?;
        let power = self.spectrum.power(&frames)?;
        let energies = apply_filterbank(&power, &self.filterbank, self.config.log_floor)?;
        let values = match kind {
            FeatureKind::LogFilterbank => energies,
            FeatureKind::Mfcc => {
                let mut out = Matrix::zeros(energies.rows(), self.config.n_ceps);
                for i in 0..energies.rows() {
                    self.dct.apply_into(energies.row(i), out.row_mut(i));
                }
                out
            }
        };
        Ok(FeatureMatrix { values, kind })
    }
}

/// One-shot convenience over [`FeatureExtractor`].
pub fn extract_features(w: &Waveform, config: &FeatureConfig, kind: FeatureKind) -> Result<FeatureMatrix> {
    FeatureExtractor::new(config)?.extract(w, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn reference_shape_is_9_by_13() {
        let config = FeatureConfig::reference(1000);
        let w = Waveform::new(noise(200, 1), 1000).unwrap();
        let f = extract_features(&w, &config, FeatureKind::Mfcc).unwrap();
        assert_eq!(f.shape(), (9, 13));
        let f = extract_features(&w, &config, FeatureKind::LogFilterbank).unwrap();
        assert_eq!(f.shape(), (9, 26));
    }

    #[test]
    fn reference_shape_at_200_hz() {
        let config = FeatureConfig::reference(200);
        let w = Waveform::new(noise(40, 2), 200).unwrap();
        assert_eq!(extract_features(&w, &config, FeatureKind::Mfcc).unwrap().shape(), (9, 13));
    }

    #[test]
    fn silence_gives_identical_rows() {
        let config = FeatureConfig::reference(1000);
        let w = Waveform::new(vec![0.0; 200], 1000).unwrap();
        let f = extract_features(&w, &config, FeatureKind::Mfcc).unwrap();
        for i in 1..f.values.rows() {
            assert_eq!(f.values.row(i), f.values.row(0));
        }
        assert!(f.values.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic_bitwise() {
        let config = FeatureConfig::reference(1000);
        let w = Waveform::new(noise(500, 3), 1000).unwrap();
        let a = extract_features(&w, &config, FeatureKind::Mfcc).unwrap();
        let b = extract_features(&w, &config, FeatureKind::Mfcc).unwrap();
        let bits = |m: &FeatureMatrix| m.values.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn rate_mismatch_and_short_signal() {
        let config = FeatureConfig::reference(1000);
        let w = Waveform::new(noise(200, 4), 200).unwrap();
        assert!(matches!(extract_features(&w, &config, FeatureKind::Mfcc), Err(FeatureError::RateMismatch { .. })));
        let w = Waveform::new(noise(10, 4), 1000).unwrap();
        assert!(matches!(extract_features(&w, &config, FeatureKind::Mfcc), Err(FeatureError::SignalTooShort { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = FeatureConfig::reference(1000);
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = FeatureConfig::reference(1000);
        c.n_ceps = 27;
        assert!(c.validate().is_err());
        let mut c = FeatureConfig::reference(1000);
        c.nfft = 16;
        assert!(matches!(c.validate(), Err(FeatureError::NfftTooSmall { .. })));
        let mut c = FeatureConfig::reference(1000);
        c.nfft = 300;
        assert!(matches!(c.validate(), Err(FeatureError::NfftNotPowerOfTwo(300))));
    }

    #[test]
    fn csv_dump_round_trip() {
        let config = FeatureConfig::reference(1000);
        let w = Waveform::new(noise(200, 5), 1000).unwrap();
        let f = extract_features(&w, &config, FeatureKind::Mfcc).unwrap();
        let text = f.to_csv(&config);
        assert!(text.contains("#stride_ms=20\n"));
        assert!(text.contains("\nc0,c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12\n"));
        assert_eq!(FeatureMatrix::from_csv(&text).unwrap(), f);
    }
}
