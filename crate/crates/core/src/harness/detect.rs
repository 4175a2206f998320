//! Running the streaming detector over files.

use super::data::load_clip;
use super::Result;
use crate::detector::{
    encode_packet, receive_loop, AlarmEvent, Detector, DetectorConfig, ReceiveConfig, ReceiveStats, ReplaySource,
    WindowDecision,
};
use crate::nn::Classifier;
use crate::waveform::{quantize, Waveform};
use std::path::Path;

/// What a detector run over one file produced.
#[derive(Debug, Clone, Default)]
pub struct DetectionRun {
    pub alarms: Vec<AlarmEvent>,
    pub decisions: Vec<WindowDecision>,
    pub stats: ReceiveStats,
}

/// The samples as they look after a trip through 16-bit packets.
pub fn wire_samples(w: &Waveform) -> Vec<f64> {
    w.samples().iter().map(|&x| quantize(x) as f64 / 32768.0).collect()
}

/// Replays `w` at `speed` through encode → decode → detector. Infinite
/// speed is the offline mode.
pub fn detect_waveform(
    classifier: &Classifier,
    w: &Waveform,
    speed: f64,
    config: &DetectorConfig,
    on_alarm: &mut dyn FnMut(&AlarmEvent) -> std::io::Result<()>,
) -> Result<DetectionRun> {
    let mut detector = Detector::new(classifier, config.clone())?;
    let source = ReplaySource::new(w, speed)?;
    let datagrams = source.map(|p| encode_packet(&p).expect("replay packets are never empty"));
    let mut alarms = Vec::new();
    let stats = receive_loop(datagrams, &mut detector, &ReceiveConfig::default(), |a| {
        alarms.push(a.clone());
        on_alarm(a)
    })?;
    Ok(DetectionRun { alarms, decisions: detector.take_decisions(), stats })
}

/// Loads a WAV (upsampling to the model rate if needed) and runs
/// [`detect_waveform`].
pub fn detect_file(
    classifier: &Classifier,
    path: &Path,
    speed: f64,
    config: &DetectorConfig,
    on_alarm: &mut dyn FnMut(&AlarmEvent) -> std::io::Result<()>,
) -> Result<DetectionRun> {
    let w = load_clip(path, classifier.sample_rate())?;
    detect_waveform(classifier, &w, speed, config, on_alarm)
}
