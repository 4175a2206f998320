use super::{FeatureError, FrameMatrix, Matrix, Result};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached real-input FFT of fixed length producing periodogram rows
/// `|X_k|² / nfft` for `k = 0..=nfft/2`.
#[derive(Clone)]
pub struct SpectrumPlan {
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumPlan").field("nfft", &self.nfft).finish()
    }
}

impl SpectrumPlan {
    pub fn new(nfft: usize) -> Result<Self> {
        if !nfft.is_power_of_two() {
            return Err(FeatureError::NfftNotPowerOfTwo(nfft));
        }
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self { nfft, fft })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn power(&self, frames: &FrameMatrix) -> Result<Matrix> {
        let l = frames.frame_len();
        if self.nfft < l {
            return Err(FeatureError::NfftTooSmall { nfft: self.nfft, frame: l });
        }
        let bins = self.nfft / 2 + 1;
        let scale = 1.0 / self.nfft as f64;
        let mut out = Matrix::zeros(frames.len(), bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.nfft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for i in 0..frames.len() {
            for (dst, &x) in buf.iter_mut().zip(frames.frames.row(i)) {
                *dst = Complex::new(x, 0.0);
            }
            for dst in buf[l..].iter_mut() {
                *dst = Complex::new(0.0, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (dst, c) in out.row_mut(i).iter_mut().zip(&buf[..bins]) {
                *dst = c.norm_sqr() * scale;
            }
        }
        Ok(out)
    }
}

/// Periodogram of every frame, zero padded to `nfft`.
pub fn power_spectrum(frames: &FrameMatrix, nfft: usize) -> Result<Matrix> {
    SpectrumPlan::new(nfft)?.power(frames)
}
