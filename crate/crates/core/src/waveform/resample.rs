//! Polyphase windowed-sinc upsampling.
//!
//! The prototype low-pass is a Kaiser-windowed sinc (beta 8.6) spanning 64
//! source samples. Its cutoff sits at 0.8 × the source Nyquist frequency so
//! that the transition band closes at Nyquist and images of near-Nyquist
//! content stay in the stopband. For a rational ratio `up / down` the filter
//! is split into `up` phases of 64 taps; output sample `n` sits at source
//! position `n * down / up` and uses phase `(n * down) mod up`. Every phase
//! is normalized to unit DC gain.

use super::{Result, Waveform, WaveformError};
use std::f64::consts::PI;

pub const KAISER_BETA: f64 = 8.6;
pub const TAPS_PER_PHASE: usize = 64;
/// Low-pass cutoff as a fraction of the source Nyquist frequency.
pub const CUTOFF: f64 = 0.8;

const HALF: usize = TAPS_PER_PHASE / 2;

/// Precomputed polyphase filter bank for one rate pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    source_rate: u32,
    target_rate: u32,
    up: u64,
    down: u64,
    phases: Vec<[f64; TAPS_PER_PHASE]>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self> {
        if source_rate == 0 || target_rate == 0 {
            return Err(WaveformError::ZeroRate);
        }
        if target_rate < source_rate {
            return Err(WaveformError::Downsample { from: source_rate, to: target_rate });
        }
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = target_rate as u64 / g;
        let down = source_rate as u64 / g;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps = [0.0; TAPS_PER_PHASE];
                for (j, tap) in taps.iter_mut().enumerate() {
                    // distance in source samples between the output instant and tap j
                    let d = (HALF as f64 - 1.0 - j as f64) + frac;
                    let r = d / HALF as f64;
                    let window =
                        if r.abs() >= 1.0 { 0.0 } else { bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta };
                    *tap = sinc(CUTOFF * d) * window;
                }
                let sum: f64 = taps.iter().sum();
                for t in taps.iter_mut() {
                    *t /= sum;
                }
                taps
            })
            .collect();
        Ok(Self { source_rate, target_rate, up, down, phases })
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn target_rate(&self) -> u32 {
        self.target_rate
    }

    /// Number of output samples produced for `n` input samples.
    pub fn output_len(&self, n: usize) -> usize {
        ((n as u64 * self.up + self.down / 2) / self.down) as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(input.len());
        let len = input.len() as i64;
        (0..n_out as u64)
            .map(|n| {
                let pos = n * self.down;
                let k = (pos / self.up) as i64;
                let taps = &self.phases[(pos % self.up) as usize];
                let first = k - (HALF as i64 - 1);
                if first >= 0 && first + TAPS_PER_PHASE as i64 <= len {
                    let window = &input[first as usize..first as usize + TAPS_PER_PHASE];
                    window.iter().zip(taps).map(|(x, h)| x * h).sum()
                } else {
                    taps.iter()
                        .enumerate()
                        .filter_map(|(j, h)| {
                            let i = first + j as i64;
                            (0..len).contains(&i).then(|| input[i as usize] * h)
                        })
                        .sum()
                }
            })
            .collect()
    }
}

/// Raises `w` to `target_rate`. Identity when the rates already match.
pub fn upsample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if w.is_empty() {
        return Err(WaveformError::Empty);
    }
    if target_rate == w.sample_rate() {
        return Ok(w.clone());
    }
    let r = Resampler::new(w.sample_rate(), target_rate)?;
    Ok(w.map_samples(r.process(w.samples()), target_rate))
}

/// Lowers `w` by an integer factor: Kaiser-windowed sinc low-pass at
/// `CUTOFF` × the target Nyquist, then every `factor`-th sample. Only the
/// sweep uses this, to derive a slower data set from a faster corpus.
pub fn decimate(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if w.is_empty() {
        return Err(WaveformError::Empty);
    }
    if target_rate == 0 {
        return Err(WaveformError::ZeroRate);
    }
    let source = w.sample_rate();
    if target_rate == source {
        return Ok(w.clone());
    }
    if target_rate > source || !source.is_multiple_of(target_rate) {
        return Err(WaveformError::Downsample { from: source, to: target_rate });
    }
    let factor = (source / target_rate) as usize;
    let half = HALF * factor;
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut taps: Vec<f64> = (0..2 * half + 1)
        .map(|j| {
            let d = j as f64 - half as f64;
            let r = d / (half + 1) as f64;
            sinc(CUTOFF * d / factor as f64) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    let x = w.samples();
    let out = (0..x.len().div_ceil(factor))
        .map(|n| {
            let centre = (n * factor) as i64;
            taps.iter()
                .enumerate()
                .filter_map(|(j, h)| {
                    let i = centre + j as i64 - half as i64;
                    (0..x.len() as i64).contains(&i).then(|| x[i as usize] * h)
                })
                .sum()
        })
        .collect();
    Ok(w.map_samples(out, target_rate))
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect()
    }

    /// Power of DFT bin `k` by direct summation.
    fn dft_power(x: &[f64], k: usize) -> f64 {
        let n = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = -2.0 * PI * k as f64 * i as f64 / n;
            re += v * a.cos();
            im += v * a.sin();
        }
        re * re + im * im
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        // I0(1) and I0(8.6) from tables
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-13);
        assert!((bessel_i0(8.6) / 750.461_159_563 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_when_rates_match() {
        let w = Waveform::new(tone(3.0, 200, 50), 200).unwrap();
        assert_eq!(upsample(&w, 200).unwrap(), w);
    }

    #[test]
    fn decimate_keeps_passband_and_rejects_aliases() {
        let n = 5000;
        // 10 Hz stays; 450 Hz would alias onto 50 Hz at 200 Hz
        let pass = Waveform::new(tone(10.0, 1000, n), 1000).unwrap();
        let stop = Waveform::new(tone(450.0, 1000, n), 1000).unwrap();
        let p = decimate(&pass, 200).unwrap();
        let s = decimate(&stop, 200).unwrap();
        assert_eq!((p.len(), p.sample_rate()), (1000, 200));
        let mid = &p.samples()[100..900];
        let peak = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01, "{peak}");
        let leak = s.samples()[100..900].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(leak < 1e-3, "{leak}");
        assert_eq!(decimate(&pass, 1000).unwrap(), pass);
        assert!(matches!(decimate(&pass, 300), Err(WaveformError::Downsample { .. })));
    }

    #[test]
    fn errors() {
        let w = Waveform::new(vec![0.1; 10], 200).unwrap();
        assert!(matches!(upsample(&w, 100), Err(WaveformError::Downsample { .. })));
        let e = Waveform::new(vec![], 200).unwrap();
        assert!(matches!(upsample(&e, 1000), Err(WaveformError::Empty)));
    }

    #[test]
    fn length_and_duration() {
        let w = Waveform::new(tone(10.0, 200, 400), 200).unwrap();
        let u = upsample(&w, 1000).unwrap();
        assert_eq!(u.sample_rate(), 1000);
        assert!((u.len() as i64 - 2000).abs() <= 1);
        assert!((u.duration() - w.duration()).abs() <= 1.0 / 1000.0);
        // non-integer ratio
        let w = Waveform::new(tone(10.0, 300, 301), 300).unwrap();
        let u = upsample(&w, 1000).unwrap();
        assert!((u.duration() - w.duration()).abs() <= 1.0 / 1000.0);
    }

    #[test]
    fn dc_passes_unchanged() {
        let u = Resampler::new(200, 1000).unwrap().process(&[0.25; 300]);
        for v in &u[5 * 64..u.len() - 5 * 64] {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn tone_stays_in_band() {
        let w = Waveform::new(tone(10.0, 200, 400), 200).unwrap();
        let u = upsample(&w, 1000).unwrap();
        let y = u.samples();
        let n = y.len();
        let bin_hz = 1000.0 / n as f64;
        let powers: Vec<f64> = (0..=n / 2).map(|k| dft_power(y, k)).collect();
        let peak = (0..powers.len()).max_by(|&a, &b| powers[a].total_cmp(&powers[b])).unwrap();
        assert!((peak as f64 * bin_hz - 10.0).abs() < 1e-9);
        let total: f64 = powers.iter().sum();
        let out_of_band: f64 =
            powers.iter().enumerate().filter(|(k, _)| *k as f64 * bin_hz > 100.0).map(|(_, p)| p).sum();
        let db = 10.0 * (out_of_band / total).log10();
        assert!(db <= -60.0, "out-of-band {db} dB");
    }

    #[test]
    fn band_limited_tone_amplitude_within_one_percent() {
        for &f in &[5.0, 20.0, 44.0] {
            let x = tone(f, 200, 800);
            let u = Resampler::new(200, 1000).unwrap().process(&x);
            // interior only: away from the zero-extended edges
            for (n, v) in u.iter().enumerate().skip(5 * 64).take(u.len() - 10 * 64) {
                let exact = (2.0 * PI * f * n as f64 / 1000.0).sin();
                assert!((v - exact).abs() <= 0.01, "f={f} n={n} {v} vs {exact}");
            }
        }
    }
}
