//! `QUKE` telemetry datagrams.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "QUKE"
//! 4       1         version (1)
//! 5       4         seq          u32 LE
//! 9       4         sample_rate  u32 LE
//! 13      2         count        u16 LE, >= 1
//! 15      2*count   samples      i16 LE
//! 15+2n   4         CRC-32 (IEEE) of bytes [0, 15+2n)
//! ```

use serde::{Deserialize, Serialize};

pub const PACKET_MAGIC: &[u8; 4] = b"QUKE";
pub const PACKET_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 15;
const CRC_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PacketError {
    #[error("packet of {len} bytes is truncated")]
    Truncated { len: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("CRC mismatch")]
    Crc,
    #[error("unsupported packet version {0}")]
    Version(u8),
    #[error("sample count {count} does not match a {len}-byte packet")]
    Length { count: usize, len: usize },
    #[error("packet must carry between 1 and 65535 samples, got {0}")]
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryPacket {
    pub seq: u32,
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl TelemetryPacket {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 2 * self.samples.len() + CRC_LEN
    }

    /// Samples scaled back to [-1, 1).
    pub fn samples_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64 / 32768.0).collect()
    }
}

pub fn encode_packet(p: &TelemetryPacket) -> Result<Vec<u8>, PacketError> {
    let n = p.samples.len();
    if n == 0 || n > u16::MAX as usize {
        return Err(PacketError::Count(n));
    }
    let mut out = Vec::with_capacity(p.encoded_len());
    out.extend_from_slice(PACKET_MAGIC);
    out.push(PACKET_VERSION);
    out.extend_from_slice(&p.seq.to_le_bytes());
    out.extend_from_slice(&p.sample_rate.to_le_bytes());
    out.extend_from_slice(&(n as u16).to_le_bytes());
    for s in &p.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Validates length, then CRC, then the header fields.
pub fn decode_packet(bytes: &[u8]) -> Result<TelemetryPacket, PacketError> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(PacketError::Truncated { len: bytes.len() });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CRC_LEN);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(PacketError::Crc);
    }
    if &body[..4] != PACKET_MAGIC {
        return Err(PacketError::BadMagic);
    }
    if body[4] != PACKET_VERSION {
        return Err(PacketError::Version(body[4]));
    }
    let seq = u32::from_le_bytes(body[5..9].try_into().unwrap());
    let sample_rate = u32::from_le_bytes(body[9..13].try_into().unwrap());
    let count = u16::from_le_bytes(body[13..15].try_into().unwrap()) as usize;
    if count == 0 {
        return Err(PacketError::Count(0));
    }
    if body.len() != HEADER_LEN + 2 * count {
        return Err(PacketError::Length { count, len: bytes.len() });
    }
    let samples = body[HEADER_LEN..].chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
    Ok(TelemetryPacket { seq, sample_rate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn packet(n: usize) -> TelemetryPacket {
        TelemetryPacket { seq: 7, sample_rate: 1000, samples: (0..n).map(|i| (i as i16).wrapping_mul(977)).collect() }
    }

    #[test]
    fn layout_is_fixed() {
        let bytes = encode_packet(&packet(2)).unwrap();
        assert_eq!(&bytes[..4], b"QUKE");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &7u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &1000u32.to_le_bytes());
        assert_eq!(&bytes[13..15], &2u16.to_le_bytes());
        assert_eq!(&bytes[15..17], &0i16.to_le_bytes());
        assert_eq!(&bytes[17..19], &977i16.to_le_bytes());
        assert_eq!(bytes.len(), 23);
        assert_eq!(&bytes[19..], &crc32fast::hash(&bytes[..19]).to_le_bytes());
    }

    #[test]
    fn empty_packet_rejected() {
        assert_eq!(encode_packet(&packet(0)), Err(PacketError::Count(0)));
    }

    #[test]
    fn every_single_bit_flip_is_caught() {
        let bytes = encode_packet(&packet(64)).unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(decode_packet(&b), Err(PacketError::Crc), "bit {bit}");
        }
    }

    #[test]
    fn header_errors_behind_valid_crc() {
        let reseal = |mut b: Vec<u8>| {
            b.truncate(b.len() - 4);
            let crc = crc32fast::hash(&b);
            b.extend_from_slice(&crc.to_le_bytes());
            b
        };
        let good = encode_packet(&packet(3)).unwrap();
        let mut m = good.clone();
        m[0] = b'X';
        assert_eq!(decode_packet(&reseal(m)), Err(PacketError::BadMagic));
        let mut v = good.clone();
        v[4] = 2;
        assert_eq!(decode_packet(&reseal(v)), Err(PacketError::Version(2)));
        let mut c = good.clone();
        c[13] = 4;
        assert!(matches!(decode_packet(&reseal(c)), Err(PacketError::Length { count: 4, .. })));
        assert!(matches!(decode_packet(&good[..10]), Err(PacketError::Truncated { len: 10 })));
    }

    proptest! {
        #[test]
        fn round_trip(seq: u32, rate: u32, samples in proptest::collection::vec(any::<i16>(), 1..300)) {
            let p = TelemetryPacket { seq, sample_rate: rate, samples };
            let bytes = encode_packet(&p).unwrap();
            prop_assert_eq!(bytes.len(), p.encoded_len());
            prop_assert_eq!(decode_packet(&bytes).unwrap(), p);
        }
    }
}
