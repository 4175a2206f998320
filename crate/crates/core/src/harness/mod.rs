//! End-to-end commands behind the `quake` CLI.

mod commands;
mod compare;
mod data;
mod detect;
mod sweep;

pub use commands::{
    cmd_eval, cmd_featurize, cmd_train, eval_classifier, feature_setup, history_csv, read_classifier, train_classifier,
    FeaturizeReport, TrainReport, TrainRequest,
};
pub use compare::{compare_stalta, comparison_csv, ComparisonRow, COMPARISON_HEADER};
pub use data::{build_samples, clip_features, load_clip, read_clip, select_window, Dataset};
pub use detect::{detect_file, detect_waveform, wire_samples, DetectionRun};
pub use sweep::{
    bar_chart, charts_from_csv, cmd_sweep, parse_sweep_csv, run_sweep, sweep_csv, ExperimentConfig, SweepReport,
    SweepRow, SWEEP_HEADER,
};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Waveform(#[from] crate::waveform::WaveformError),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    StaLta(#[from] crate::stalta::StaLtaError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
    #[error("{0}")]
    Message(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
