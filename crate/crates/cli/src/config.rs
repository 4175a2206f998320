//! TOML run configuration. Every section is optional; command-line flags
//! win over file values, which win over built-in defaults.

use quake_core::detector::{DetectorConfig, ReceiveConfig};
use quake_core::features::{FeatureConfig, FeatureKind};
use quake_core::nn::ModelKind;
use quake_core::nn::{LstmReadout, TrainConfig};
use quake_core::stalta::StaLtaConfig;
use quake_core::synth::SynthConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    /// Frame, stride, FFT and filterbank settings shared by every command.
    pub features: FeatureConfig,
    pub setup: SetupConfig,
    pub train: TrainConfig,
    pub detector: DetectorConfig,
    pub receive: ReceiveConfig,
    pub stalta: StaLtaSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            synth: SynthConfig::default(),
            features: FeatureConfig::reference(1000),
            setup: SetupConfig::default(),
            train: TrainConfig::default(),
            detector: DetectorConfig::default(),
            receive: ReceiveConfig::default(),
            stalta: StaLtaSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupConfig {
    /// Model input rate; clips at a lower rate are upsampled.
    pub rate_hz: u32,
    pub window_s: f64,
    pub kind: FeatureKind,
    pub readout: LstmReadout,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self { rate_hz: 1000, window_s: 0.2, kind: FeatureKind::Mfcc, readout: LstmReadout::LastStep }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaLtaSection {
    pub sta_window: f64,
    pub lta_window: f64,
    pub trigger_on: f64,
    pub trigger_off: f64,
    /// trigger_on values swept by compare-stalta.
    pub thresholds: Vec<f64>,
}

impl StaLtaSection {
    pub fn base(&self) -> StaLtaConfig {
        StaLtaConfig {
            sta_window: self.sta_window,
            lta_window: self.lta_window,
            trigger_on: self.trigger_on,
            trigger_off: self.trigger_off,
        }
    }
}

impl Default for StaLtaSection {
    fn default() -> Self {
        let b = StaLtaConfig::default();
        Self {
            sta_window: b.sta_window,
            lta_window: b.lta_window,
            trigger_on: b.trigger_on,
            trigger_off: b.trigger_off,
            thresholds: vec![1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub windows_s: Vec<f64>,
    pub rates_hz: Vec<u32>,
    pub models: Vec<ModelKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = quake_core::harness::ExperimentConfig::default();
        Self { windows_s: d.windows_s, rates_hz: d.rates_hz, models: d.models }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text =
            std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }
}
