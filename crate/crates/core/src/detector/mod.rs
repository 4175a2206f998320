//! Streaming detection: a bounded sample buffer feeding a trained
//! classifier at fixed evaluation points, with per-alarm latency split
//! into gather, process and predict time.

mod alarm_log;
mod buffer;
mod packet;
mod receive;
mod replay;

pub use alarm_log::{AlarmLog, AlarmRecord};
pub use buffer::StreamBuffer;
pub use packet::{
    decode_packet, encode_packet, PacketError, TelemetryPacket, HEADER_LEN, PACKET_MAGIC, PACKET_VERSION,
};
pub use receive::{receive_loop, ReceiveConfig, ReceiveStats};
pub use replay::{packetize, ReplaySource, MAX_PACKET_SAMPLES};

use crate::nn::{Classifier, NnError};
use crate::Label;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("stream rate {got} Hz does not match the model rate {expected} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error("stream integrity lost: {consecutive} consecutive corrupt packets")]
    StreamIntegrity { consecutive: usize },
    #[error("replay: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DetectorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Seconds between evaluations; `None` means one window (no overlap).
    pub hop_s: Option<f64>,
    /// Samples (in seconds) collected before the first evaluation.
    pub min_buffer_s: f64,
    /// Minimum earthquake probability that raises an alarm.
    pub alarm_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { hop_s: None, min_buffer_s: 1.28, alarm_threshold: 0.5 }
    }
}

/// Outcome of one evaluation, alarm or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDecision {
    /// Absolute index of the window's first sample.
    pub start_sample: u64,
    pub label: Label,
    /// Probability of `label`.
    pub probability: f64,
    pub earthquake_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub label: Label,
    pub probability: f64,
    /// Absolute index of the last sample of the triggering window.
    pub trigger_sample_index: u64,
    pub gather_ms: f64,
    pub process_ms: f64,
    pub predict_ms: f64,
    /// Always `gather_ms + process_ms + predict_ms`.
    pub total_ms: f64,
}

/// Window ends (exclusive sample indices) the detector evaluates at, up to
/// `len` samples. Depends only on the stream length, never on chunking.
pub fn evaluation_points(window: usize, hop: usize, warmup: usize, len: u64) -> impl Iterator<Item = u64> {
    let first = window.max(warmup) as u64;
    (0..).map(move |k| first + k * hop as u64).take_while(move |&e| e <= len)
}

pub struct Detector<'a> {
    classifier: &'a Classifier,
    config: DetectorConfig,
    buffer: StreamBuffer,
    window: usize,
    hop: usize,
    next_eval: u64,
    decisions: Vec<WindowDecision>,
}

impl<'a> Detector<'a> {
    pub fn new(classifier: &'a Classifier, config: DetectorConfig) -> Result<Self> {
        let rate = classifier.sample_rate();
        let window = classifier.window_samples();
        let hop = match config.hop_s {
            None => window,
            Some(h) if h > 0.0 => (h * rate as f64).round() as usize,
            Some(h) => return Err(DetectorError::Config(format!("hop {h} s must be positive"))),
        };
        if hop == 0 {
            return Err(DetectorError::Config("hop is shorter than one sample".into()));
        }
        if !(config.min_buffer_s >= 0.0) {
            return Err(DetectorError::Config("min_buffer_s must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&config.alarm_threshold) {
            return Err(DetectorError::Config("alarm_threshold must be in [0, 1]".into()));
        }
        let warmup = (config.min_buffer_s * rate as f64).round() as usize;
        let next_eval = window.max(warmup) as u64;
        Ok(Self {
            classifier,
            config,
            buffer: StreamBuffer::new(window, rate),
            window,
            hop,
            next_eval,
            decisions: Vec::new(),
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.buffer.sample_rate()
    }

    pub fn window_samples(&self) -> usize {
        self.window
    }

    pub fn hop_samples(&self) -> usize {
        self.hop
    }

    pub fn samples_seen(&self) -> u64 {
        self.buffer.total()
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Every evaluation so far, in stream order.
    pub fn decisions(&self) -> &[WindowDecision] {
        &self.decisions
    }

    pub fn take_decisions(&mut self) -> Vec<WindowDecision> {
        std::mem::take(&mut self.decisions)
    }

    /// Checks the stream rate, then behaves like [`Detector::push_samples`].
    pub fn push_at_rate(&mut self, samples: &[f64], rate: u32) -> Result<Vec<AlarmEvent>> {
        if rate != self.sample_rate() {
            return Err(DetectorError::RateMismatch { expected: self.sample_rate(), got: rate });
        }
        self.push_samples(samples)
    }

    /// Appends samples (assumed to be at the model rate) and runs every
    /// evaluation point they complete.
    pub fn push_samples(&mut self, samples: &[f64]) -> Result<Vec<AlarmEvent>> {
        let arrived = Instant::now();
        let mut alarms = Vec::new();
        let mut rest = samples;
        while !rest.is_empty() {
            let room = (self.next_eval - self.buffer.total()) as usize;
            let take = room.min(rest.len());
            self.buffer.push(&rest[..take], arrived);
            rest = &rest[take..];
            if self.buffer.total() == self.next_eval {
                if let Some(alarm) = self.evaluate()? {
                    alarms.push(alarm);
                }
                self.next_eval += self.hop as u64;
            }
        }
        Ok(alarms)
    }

    fn evaluate(&mut self) -> Result<Option<AlarmEvent>> {
        let eval_start = Instant::now();
        let start_sample = self.buffer.total() - self.window as u64;
        let window = self.buffer.latest(self.window).expect("evaluation only once the window is full");
        let first_arrival = self.buffer.arrival_of(start_sample).unwrap_or(eval_start);
        let gather_ms = eval_start.saturating_duration_since(first_arrival).as_secs_f64() * 1e3;
        let p = self.classifier.classify_window(&window)?;
        self.decisions.push(WindowDecision {
            start_sample,
            label: p.label,
            probability: p.probability,
            earthquake_probability: p.probabilities[Label::Earthquake.index()],
        });
        if p.label == Label::Earthquake && p.probability >= self.config.alarm_threshold {
            return Ok(Some(AlarmEvent {
                label: p.label,
                probability: p.probability,
                trigger_sample_index: self.buffer.total() - 1,
                gather_ms,
                process_ms: p.process_ms,
                predict_ms: p.predict_ms,
                total_ms: gather_ms + p.process_ms + p.predict_ms,
            }));
        }
        Ok(None)
    }
}

/// Classifies the same windows the detector would, directly from a
/// complete signal.
pub fn classify_windows_batch(
    classifier: &Classifier,
    samples: &[f64],
    config: &DetectorConfig,
    execution: crate::Execution,
) -> Result<Vec<WindowDecision>> {
    let probe = Detector::new(classifier, config.clone())?;
    let (window, hop) = (probe.window, probe.hop);
    let warmup = (config.min_buffer_s * classifier.sample_rate() as f64).round() as usize;
    let ends: Vec<u64> = evaluation_points(window, hop, warmup, samples.len() as u64).collect();
    crate::exec::map(execution, &ends, |&end| {
        let start = end as usize - window;
        let p = classifier.classify_window(&samples[start..end as usize])?;
        Ok(WindowDecision {
            start_sample: start as u64,
            label: p.label,
            probability: p.probability,
            earthquake_probability: p.probabilities[Label::Earthquake.index()],
        })
    })
    .into_iter()
    .collect()
}
