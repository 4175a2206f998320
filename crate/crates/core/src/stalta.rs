//! Classic STA/LTA trigger on the squared-amplitude characteristic function.
//!
//! Both windows are trailing (causal) and end at the same sample. The ratio
//! is only defined once the LTA window is full.

use crate::waveform::Waveform;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Floor applied to the LTA before dividing.
pub const LTA_FLOOR: f64 = 1e-15;

/// Running sums are recomputed from scratch this often to bound drift.
const RESYNC_EVERY: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum StaLtaError {
    #[error("invalid STA/LTA config: {0}")]
    Config(String),
    #[error("waveform of {duration:.3} s is not longer than the LTA window ({lta:.3} s)")]
    TooShort { duration: f64, lta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaLtaConfig {
    /// Seconds.
    pub sta_window: f64,
    /// Seconds.
    pub lta_window: f64,
    pub trigger_on: f64,
    /// Stored for de-triggering; not used when picking the onset.
    pub trigger_off: f64,
}

impl Default for StaLtaConfig {
    fn default() -> Self {
        Self { sta_window: 0.5, lta_window: 10.0, trigger_on: 4.0, trigger_off: 1.5 }
    }
}

impl StaLtaConfig {
    pub fn validate(&self) -> Result<(), StaLtaError> {
        if !(self.sta_window > 0.0 && self.sta_window < self.lta_window) {
            return Err(StaLtaError::Config(format!("need 0 < sta ({}) < lta ({})", self.sta_window, self.lta_window)));
        }
        if !(self.trigger_on > 1.0) {
            return Err(StaLtaError::Config(format!("trigger_on {} must exceed 1", self.trigger_on)));
        }
        if self.trigger_off > self.trigger_on {
            return Err(StaLtaError::Config(format!(
                "trigger_off {} exceeds trigger_on {}",
                self.trigger_off, self.trigger_on
            )));
        }
        Ok(())
    }

    fn lengths(&self, sample_rate: u32) -> (usize, usize) {
        let rate = sample_rate as f64;
        let sta = ((self.sta_window * rate).round() as usize).max(1);
        let lta = ((self.lta_window * rate).round() as usize).max(sta + 1);
        (sta, lta)
    }
}

/// Per-sample STA/LTA ratio; samples before `first_defined` have no value.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    sample_rate: u32,
    first_defined: usize,
    values: Vec<f64>,
}

impl RatioSeries {
    pub fn len(&self) -> usize {
        self.first_defined + self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn first_defined(&self) -> usize {
        self.first_defined
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.first_defined).and_then(|j| self.values.get(j).copied())
    }

    /// `(sample index, ratio)` over the defined region.
    pub fn defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(j, &r)| (j + self.first_defined, r))
    }

    pub fn max(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }

    /// `time,ratio` CSV over the defined region.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,ratio\n");
        for (i, r) in self.defined() {
            let _ = writeln!(out, "{},{}", i as f64 / self.sample_rate as f64, r);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerResult {
    pub ratio: RatioSeries,
    pub onset_index: Option<usize>,
    pub onset_time: Option<f64>,
}

pub fn sta_lta_ratio(w: &Waveform, config: &StaLtaConfig) -> Result<RatioSeries, StaLtaError> {
    config.validate()?;
    let (sta_len, lta_len) = config.lengths(w.sample_rate());
    if w.len() <= lta_len {
        return Err(StaLtaError::TooShort { duration: w.duration(), lta: config.lta_window });
    }
    let cf: Vec<f64> = w.samples().iter().map(|x| x * x).collect();
    let first = lta_len - 1;
    let mut sta_sum: f64 = cf[first + 1 - sta_len..=first].iter().sum();
    let mut lta_sum: f64 = cf[..=first].iter().sum();
    let mut values = Vec::with_capacity(cf.len() - first);
    for i in first..cf.len() {
        if i > first {
            if (i - first) % RESYNC_EVERY == 0 {
                sta_sum = cf[i + 1 - sta_len..=i].iter().sum();
                lta_sum = cf[i + 1 - lta_len..=i].iter().sum();
            } else {
                sta_sum += cf[i] - cf[i - sta_len];
                lta_sum += cf[i] - cf[i - lta_len];
            }
        }
        let sta = (sta_sum / sta_len as f64).max(0.0);
        let lta = (lta_sum / lta_len as f64).max(LTA_FLOOR);
        values.push(sta / lta);
    }
    Ok(RatioSeries { sample_rate: w.sample_rate(), first_defined: first, values })
}

/// First sample where the ratio reaches `trigger_on`.
pub fn pick_onset(ratio: RatioSeries, config: &StaLtaConfig) -> TriggerResult {
    let onset_index = ratio.defined().find(|&(_, r)| r >= config.trigger_on).map(|(i, _)| i);
    let onset_time = onset_index.map(|i| i as f64 / ratio.sample_rate as f64);
    TriggerResult { ratio, onset_index, onset_time }
}

/// Ratio plus onset in one call.
pub fn trigger(w: &Waveform, config: &StaLtaConfig) -> Result<TriggerResult, StaLtaError> {
    Ok(pick_onset(sta_lta_ratio(w, config)?, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Ratio by re-summing both windows at every sample.
    fn naive_ratio(x: &[f64], sta: usize, lta: usize) -> Vec<f64> {
        (lta - 1..x.len())
            .map(|i| {
                let s: f64 = x[i + 1 - sta..=i].iter().map(|v| v * v).sum::<f64>() / sta as f64;
                let l: f64 = x[i + 1 - lta..=i].iter().map(|v| v * v).sum::<f64>() / lta as f64;
                s / l.max(LTA_FLOOR)
            })
            .collect()
    }

    fn cfg(sta: f64, lta: f64, on: f64) -> StaLtaConfig {
        StaLtaConfig { sta_window: sta, lta_window: lta, trigger_on: on, trigger_off: 1.0 }
    }

    #[test]
    fn constant_signal_ratio_is_one() {
        let w = Waveform::new(vec![0.3; 3000], 100).unwrap();
        let r = sta_lta_ratio(&w, &cfg(0.5, 10.0, 4.0)).unwrap();
        assert_eq!(r.first_defined(), 999);
        assert!(r.get(998).is_none());
        for (_, v) in r.defined() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_signal_ratio_is_zero() {
        let w = Waveform::new(vec![0.0; 3000], 100).unwrap();
        let r = sta_lta_ratio(&w, &cfg(0.5, 10.0, 4.0)).unwrap();
        assert!(r.defined().all(|(_, v)| v == 0.0));
        assert!(pick_onset(r, &cfg(0.5, 10.0, 4.0)).onset_index.is_none());
    }

    #[test]
    fn sliding_sums_match_resummation() {
        let x = noise(20_000, 11);
        let w = Waveform::new(x.clone(), 100).unwrap();
        let r = sta_lta_ratio(&w, &cfg(0.5, 10.0, 4.0)).unwrap();
        let oracle = naive_ratio(&x, 50, 1000);
        for ((_, a), b) in r.defined().zip(oracle) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn amplitude_step_drives_ratio_above_ten() {
        let rate = 100;
        let mut x = noise(3000, 5);
        let t = 2000;
        for v in &mut x[t..] {
            *v *= 10.0;
        }
        let w = Waveform::new(x.clone(), rate).unwrap();
        let c = cfg(0.5, 10.0, 4.0);
        let r = sta_lta_ratio(&w, &c).unwrap();
        let oracle = naive_ratio(&x, 50, 1000);
        let peak = (t..=t + 50).filter_map(|i| r.get(i)).fold(0.0, f64::max);
        let peak_oracle = (t..=t + 50).map(|i| oracle[i - 999]).fold(0.0, f64::max);
        assert!(peak >= 10.0, "peak {peak}");
        assert!((peak - peak_oracle).abs() < 1e-9 * peak_oracle);
    }

    #[test]
    fn scale_invariance() {
        let x = noise(2000, 3);
        let c = cfg(0.2, 5.0, 2.0);
        let a = trigger(&Waveform::new(x.clone(), 100).unwrap(), &c).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| -7.5 * v).collect();
        let b = trigger(&Waveform::new(scaled, 100).unwrap(), &c).unwrap();
        assert_eq!(a.onset_index, b.onset_index);
        for ((_, u), (_, v)) in a.ratio.defined().zip(b.ratio.defined()) {
            assert!((u - v).abs() <= 1e-12 * u.max(1.0));
        }
    }

    #[test]
    fn never_crossing_means_no_onset() {
        let w = Waveform::new(noise(3000, 9), 100).unwrap();
        let t = trigger(&w, &cfg(0.5, 10.0, 50.0)).unwrap();
        assert_eq!(t.onset_index, None);
        assert_eq!(t.onset_time, None);
        assert!(t.ratio.defined().all(|(_, r)| r >= 0.0));
    }

    #[test]
    fn glitch_fires_low_threshold() {
        let mut x: Vec<f64> = noise(3000, 21).iter().map(|v| v * 0.1).collect();
        x[2200] = 3.0;
        let w = Waveform::new(x, 100).unwrap();
        let t = trigger(&w, &cfg(0.5, 10.0, 1.5)).unwrap();
        assert_eq!(t.onset_index, Some(2200));
    }

    #[test]
    fn config_and_length_errors() {
        assert!(cfg(1.0, 0.5, 4.0).validate().is_err());
        assert!(cfg(0.5, 10.0, 1.0).validate().is_err());
        let bad_off = StaLtaConfig { trigger_off: 5.0, ..cfg(0.5, 10.0, 4.0) };
        assert!(bad_off.validate().is_err());
        let w = Waveform::new(vec![0.1; 500], 100).unwrap();
        assert!(matches!(sta_lta_ratio(&w, &cfg(0.5, 10.0, 4.0)), Err(StaLtaError::TooShort { .. })));
    }

    #[test]
    fn csv_export() {
        let w = Waveform::new(vec![0.3; 12], 2).unwrap();
        let r = sta_lta_ratio(&w, &cfg(0.5, 5.0, 4.0)).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("time,ratio\n4.5,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
