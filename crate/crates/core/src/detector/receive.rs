use super::{decode_packet, AlarmEvent, Detector, DetectorError, PacketError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiveConfig {
    /// Consecutive CRC failures tolerated before giving up on the stream.
    pub max_consecutive_crc_failures: usize,
}

impl Default for ReceiveConfig {
    fn default() -> Self {
        Self { max_consecutive_crc_failures: 8 }
    }
}

/// Link-quality counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiveStats {
    pub datagrams: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub out_of_order: u64,
    /// Forward jumps in the sequence number.
    pub gaps: u64,
    /// Packets skipped over by those jumps.
    pub missing_packets: u64,
    pub crc_failures: u64,
    /// Well-checksummed but otherwise invalid datagrams.
    pub malformed: u64,
    pub samples: u64,
    pub alarms: u64,
}

impl ReceiveStats {
    pub fn dropped(&self) -> u64 {
        self.duplicates + self.out_of_order + self.crc_failures + self.malformed
    }
}

/// Decodes datagrams, keeps them in sequence order, feeds the detector and
/// hands every alarm to `on_alarm` as soon as it fires.
///
/// Duplicates and late packets are dropped and counted; forward gaps are
/// logged and accepted. Returns when `datagrams` is exhausted.
pub fn receive_loop<I, F>(
    datagrams: I,
    detector: &mut Detector<'_>,
    config: &ReceiveConfig,
    mut on_alarm: F,
) -> Result<ReceiveStats>
where
    I: IntoIterator<Item = Vec<u8>>,
    F: FnMut(&AlarmEvent) -> std::io::Result<()>,
{
    let mut stats = ReceiveStats::default();
    let mut last_seq: Option<u32> = None;
    let mut consecutive_crc = 0usize;
    for bytes in datagrams {
        stats.datagrams += 1;
        let packet = match decode_packet(&bytes) {
            Ok(p) => p,
            Err(PacketError::Crc) => {
                stats.crc_failures += 1;
                consecutive_crc += 1;
                log::warn!("dropping corrupt datagram ({consecutive_crc} in a row)");
                if consecutive_crc >= config.max_consecutive_crc_failures.max(1) {
                    return Err(DetectorError::StreamIntegrity { consecutive: consecutive_crc });
                }
                continue;
            }
            Err(e) => {
                stats.malformed += 1;
                log::warn!("dropping datagram: {e}");
                continue;
            }
        };
        consecutive_crc = 0;
        if let Some(last) = last_seq {
            if packet.seq == last {
                stats.duplicates += 1;
                continue;
            }
            if packet.seq < last {
                stats.out_of_order += 1;
                continue;
            }
            if packet.seq > last + 1 {
                let missing = (packet.seq - last - 1) as u64;
                stats.gaps += 1;
                stats.missing_packets += missing;
                log::warn!("sequence gap: {missing} packet(s) missing before seq {}", packet.seq);
            }
        }
        last_seq = Some(packet.seq);
        stats.accepted += 1;
        stats.samples += packet.samples.len() as u64;
        for alarm in detector.push_at_rate(&packet.samples_f64(), packet.sample_rate)? {
            stats.alarms += 1;
            on_alarm(&alarm)?;
        }
    }
    Ok(stats)
}
