//! Binary model container.
//!
//! Layout (little-endian): magic `QFM1`, u16 version, u32 header length and
//! a JSON header (spec, feature setup, metadata), u32 column count followed
//! by the standardizer means and standard deviations as f64, u32 tensor
//! count, then per tensor a u16-prefixed name, u8 rank, u32 dims and f64
//! data. A CRC-32 of everything before it closes the file.

use super::{Classifier, FeatureSetup, ModelParams, ModelSpec, Network, NnError, Result, Standardizer, Tensor};
use super::{TrainConfig, TrainedModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MODEL_MAGIC: &[u8; 4] = b"QFM1";
pub const MODEL_VERSION: u16 = 1;

/// Provenance stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub train: TrainConfig,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    setup: FeatureSetup,
    metadata: ModelMetadata,
}

pub fn save_model(classifier: &Classifier) -> Vec<u8> {
    let header = Header {
        spec: classifier.model.network.spec().clone(),
        setup: classifier.setup.clone(),
        metadata: classifier.metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let norm = &classifier.model.standardizer;
    out.extend_from_slice(&(norm.mean.len() as u32).to_le_bytes());
    for v in norm.mean.iter().chain(&norm.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let params = classifier.model.network.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(NnError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(NnError::Truncated)?)?;
        Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }
}

pub fn load_model(bytes: &[u8]) -> Result<Classifier> {
    if bytes.len() < 4 {
        return Err(NnError::Truncated);
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(NnError::BadMagic);
    }
    if bytes.len() < 10 {
        return Err(NnError::Truncated);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(NnError::Version { found: version, expected: MODEL_VERSION });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(NnError::Checksum);
    }
    let mut r = Reader { buf: body, pos: 6 };
    let header_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| NnError::Corrupt(format!("header: {e}")))?;
    let cols = r.u32()? as usize;
    let mean = r.f64s(cols)?;
    let std = r.f64s(cols)?;
    let n = r.u32()? as usize;
    let mut entries = Vec::new();
    for _ in 0..n {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NnError::Corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(NnError::Truncated)?;
        let data = r.f64s(count)?;
        entries.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != body.len() {
        return Err(NnError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let network = Network::from_parts(header.spec, ModelParams::new(entries))?;
    let model = TrainedModel { network, standardizer: Standardizer { mean, std } };
    Classifier::new(model, header.setup, header.metadata)
}
