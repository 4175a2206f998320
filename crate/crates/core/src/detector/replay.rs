use super::{DetectorError, Result, TelemetryPacket};
use crate::waveform::{quantize, Waveform};
use std::time::{Duration, Instant};

pub const MAX_PACKET_SAMPLES: usize = 256;

/// Splits a waveform into quantized packets of at most `per_packet`
/// samples with consecutive sequence numbers.
pub fn packetize(w: &Waveform, per_packet: usize, first_seq: u32) -> Vec<TelemetryPacket> {
    let per_packet = per_packet.clamp(1, MAX_PACKET_SAMPLES);
    w.samples()
        .chunks(per_packet)
        .enumerate()
        .map(|(k, chunk)| TelemetryPacket {
            seq: first_seq.wrapping_add(k as u32),
            sample_rate: w.sample_rate(),
            samples: chunk.iter().map(|&x| quantize(x)).collect(),
        })
        .collect()
}

/// Paced packet stream: each packet is released once the stream clock
/// reaches the time of its last sample, divided by `speed`. An infinite
/// speed never sleeps.
#[derive(Debug)]
pub struct ReplaySource {
    packets: std::vec::IntoIter<TelemetryPacket>,
    sample_rate: f64,
    speed: f64,
    emitted_samples: u64,
    started: Option<Instant>,
}

impl ReplaySource {
    pub fn new(w: &Waveform, speed: f64) -> Result<Self> {
        Self::with_packet_size(w, speed, MAX_PACKET_SAMPLES)
    }

    pub fn with_packet_size(w: &Waveform, speed: f64, per_packet: usize) -> Result<Self> {
        if w.is_empty() {
            return Err(DetectorError::Replay("empty waveform".into()));
        }
        if !(speed > 0.0) {
            return Err(DetectorError::Replay(format!("speed {speed} must be positive")));
        }
        Ok(Self {
            packets: packetize(w, per_packet, 0).into_iter(),
            sample_rate: w.sample_rate() as f64,
            speed,
            emitted_samples: 0,
            started: None,
        })
    }

    pub fn remaining(&self) -> usize {
        self.packets.len()
    }
}

impl Iterator for ReplaySource {
    type Item = TelemetryPacket;

    fn next(&mut self) -> Option<TelemetryPacket> {
        let packet = self.packets.next()?;
        let started = *self.started.get_or_insert_with(Instant::now);
        self.emitted_samples += packet.samples.len() as u64;
        if self.speed.is_finite() {
            let due = started + Duration::from_secs_f64(self.emitted_samples as f64 / self.sample_rate / self.speed);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        Some(packet)
    }
}
