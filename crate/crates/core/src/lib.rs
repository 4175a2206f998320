//! Earthquake event detection from waveform data.
//!
//! The toolkit treats seismograph traces as audio: waveforms are peak
//! normalized, optionally upsampled, and turned into MFCC (or log Mel
//! filterbank) matrices that feed a small CNN or LSTM classifier. A classic
//! STA/LTA trigger serves as the baseline, and a streaming detector runs a
//! trained model over live or replayed sample streams while accounting for
//! alarm latency.
//!
//! Module map:
//!
//! - [`waveform`]: WAV/CSV I/O, peak normalization, polyphase upsampling.
//! - [`features`]: pre-emphasis, framing, Hamming window, power spectrum,
//!   Mel filterbank, DCT.
//! - [`stalta`]: STA/LTA ratio and onset picking.
//! - [`nn`]: tensors, layer kernels with backprop, Adam, training, model files.
//! - [`detector`]: ring buffer, wire protocol, replay source, receive loop.
//! - [`metrics`]: confusion matrix, accuracy, Cohen's kappa.
//! - [`synth`]: seeded synthetic quake / non-quake corpus.
//! - [`harness`]: the end-to-end commands behind the `quake` CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod exec;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod stalta;
pub mod synth;
pub mod waveform;

pub use exec::Execution;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Binary class label used throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonEarthquake,
    Earthquake,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NonEarthquake, Label::Earthquake];

    pub fn index(self) -> usize {
        match self {
            Label::NonEarthquake => 0,
            Label::Earthquake => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NonEarthquake),
            1 => Some(Label::Earthquake),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonEarthquake => "non_earthquake",
            Label::Earthquake => "earthquake",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "earthquake" => Ok(Label::Earthquake),
            "non_earthquake" => Ok(Label::NonEarthquake),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}
