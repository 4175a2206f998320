use super::{FeatureConfig, FeatureError, Matrix, Result};
use std::f64::consts::PI;

/// `y[0] = x[0]`, `y[t] = x[t] - alpha * x[t-1]`.
pub fn pre_emphasis(signal: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let Some(&first) = signal.first() else {
        return Err(FeatureError::EmptySignal);
    };
    let mut out = Vec::with_capacity(signal.len());
    out.push(first);
    out.extend(signal.windows(2).map(|w| w[1] - alpha * w[0]));
    Ok(out)
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2πn/(N-1))`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(FeatureError::WindowTooShort(n));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            // fold onto the first half so the window is exactly palindromic
            let k = i.min(n - 1 - i) as f64;
            0.54 - 0.46 * (2.0 * PI * k / denom).cos()
        })
        .collect())
}

/// Windowed frames of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    /// M × L, each row already multiplied by the Hamming window.
    pub frames: Matrix,
    /// Start time of each frame in seconds.
    pub frame_times: Vec<f64>,
}

impl FrameMatrix {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn frame_len(&self) -> usize {
        self.frames.cols()
    }
}

pub fn frame_signal(signal: &[f64], config: &FeatureConfig) -> Result<FrameMatrix> {
    config.validate()?;
    let window = hamming_window(config.frame_len_samples())?;
    frame_with_window(signal, config, &window)
}

pub(super) fn frame_with_window(signal: &[f64], config: &FeatureConfig, window: &[f64]) -> Result<FrameMatrix> {
    let l = window.len();
    if signal.len() < l {
        return Err(FeatureError::SignalTooShort { len: signal.len(), frame: l });
    }
    let stride = config.stride_samples();
    let m = 1 + (signal.len() - l) / stride;
    let mut frames = Matrix::zeros(m, l);
    let mut frame_times = Vec::with_capacity(m);
    for i in 0..m {
        let start = i * stride;
        for ((dst, x), w) in frames.row_mut(i).iter_mut().zip(&signal[start..start + l]).zip(window) {
            *dst = x * w;
        }
        frame_times.push(start as f64 / config.sample_rate as f64);
    }
    Ok(FrameMatrix { frames, frame_times })
}
