//! Dataset manifest: `path,label,split` CSV.

use super::{Result, WaveformError};
use crate::Label;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: String,
    pub label: Label,
    pub split: Split,
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<DatasetEntry>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| WaveformError::Manifest(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label", "split"] {
        return Err(WaveformError::Manifest(format!(
            "expected header path,label,split, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, row) in rdr.deserialize::<DatasetEntry>().enumerate() {
        let entry = row.map_err(|e| WaveformError::Manifest(format!("row {}: {e}", i + 2)))?;
        if !seen.insert(entry.path.clone()) {
            return Err(WaveformError::Manifest(format!("duplicate path {}", entry.path)));
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest<W: Write>(writer: W, entries: &[DatasetEntry]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for e in entries {
        wtr.serialize(e).map_err(|e| WaveformError::Manifest(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
