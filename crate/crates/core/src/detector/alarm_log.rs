use super::AlarmEvent;
use crate::Label;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One line of the alarm log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRecord {
    /// ISO-8601 wall-clock time the alarm was logged.
    pub timestamp: String,
    pub label: Label,
    pub probability: f64,
    pub trigger_sample_index: u64,
    /// Trigger position in seconds from the start of the stream.
    pub trigger_time_s: f64,
    pub gather_ms: f64,
    pub process_ms: f64,
    pub predict_ms: f64,
    pub total_ms: f64,
}

impl AlarmRecord {
    pub fn new(event: &AlarmEvent, sample_rate: u32) -> Self {
        Self {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            label: event.label,
            probability: event.probability,
            trigger_sample_index: event.trigger_sample_index,
            trigger_time_s: (event.trigger_sample_index + 1) as f64 / sample_rate as f64,
            gather_ms: event.gather_ms,
            process_ms: event.process_ms,
            predict_ms: event.predict_ms,
            total_ms: event.total_ms,
        }
    }
}

/// Newline-delimited JSON writer, flushed after every record so an
/// interrupted run keeps everything logged so far.
pub struct AlarmLog<W: Write> {
    out: W,
    sample_rate: u32,
    written: usize,
}

impl<W: Write> AlarmLog<W> {
    pub fn new(out: W, sample_rate: u32) -> Self {
        Self { out, sample_rate, written: 0 }
    }

    pub fn record(&mut self, event: &AlarmEvent) -> std::io::Result<()> {
        let rec = AlarmRecord::new(event, self.sample_rate);
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
