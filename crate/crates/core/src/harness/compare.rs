//! STA/LTA threshold sweep against a trained model on the test split.

use super::data::{load_clip, read_clip, Dataset};
use super::detect::detect_waveform;
use super::{HarnessError, Result};
use crate::detector::DetectorConfig;
use crate::exec::{self, Execution};
use crate::nn::Classifier;
use crate::stalta::{pick_onset, sta_lta_ratio, StaLtaConfig};
use crate::waveform::Split;
use crate::Label;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `sta_lta`, or the model kind.
    pub method: String,
    /// Settings the method needs tuned beforehand (`none` for models).
    pub prerequisites: String,
    pub accuracy: f64,
    /// Non-earthquake clips that raised an alarm.
    pub false_alarms: usize,
    pub false_alarm_rate: f64,
    /// Earthquake clips that raised an alarm.
    pub detection_rate: f64,
    /// First alarm time minus true onset, over detected earthquakes.
    pub mean_time_to_alarm_s: f64,
    pub mean_gather_ms: f64,
    pub mean_process_ms: f64,
    pub mean_predict_ms: f64,
    pub mean_total_ms: f64,
}

pub const COMPARISON_HEADER: &str = "method,prerequisites,accuracy,false_alarms,false_alarm_rate,detection_rate,\
mean_time_to_alarm_s,mean_gather_ms,mean_process_ms,mean_predict_ms,mean_total_ms";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{:.6},{:.6},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.method,
            r.prerequisites,
            r.accuracy,
            r.false_alarms,
            r.false_alarm_rate,
            r.detection_rate,
            r.mean_time_to_alarm_s,
            r.mean_gather_ms,
            r.mean_process_ms,
            r.mean_predict_ms,
            r.mean_total_ms
        );
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-clip outcome: did it alarm, and when (seconds into the clip).
struct ClipOutcome {
    label: Label,
    onset_s: Option<f64>,
    alarm_s: Option<f64>,
    latency: Vec<[f64; 4]>,
}

fn summarize(method: String, prerequisites: String, outcomes: &[ClipOutcome]) -> ComparisonRow {
    let quakes: Vec<&ClipOutcome> = outcomes.iter().filter(|o| o.label == Label::Earthquake).collect();
    let noise: Vec<&ClipOutcome> = outcomes.iter().filter(|o| o.label == Label::NonEarthquake).collect();
    let correct = outcomes.iter().filter(|o| o.alarm_s.is_some() == (o.label == Label::Earthquake)).count();
    let false_alarms = noise.iter().filter(|o| o.alarm_s.is_some()).count();
    let detected = quakes.iter().filter(|o| o.alarm_s.is_some()).count();
    let delays: Vec<f64> = quakes.iter().filter_map(|o| Some(o.alarm_s? - o.onset_s?)).collect();
    let lat: Vec<[f64; 4]> = outcomes.iter().flat_map(|o| o.latency.iter().copied()).collect();
    let col = |k: usize| mean(&lat.iter().map(|l| l[k]).collect::<Vec<_>>());
    ComparisonRow {
        method,
        prerequisites,
        accuracy: correct as f64 / outcomes.len().max(1) as f64,
        false_alarms,
        false_alarm_rate: false_alarms as f64 / noise.len().max(1) as f64,
        detection_rate: detected as f64 / quakes.len().max(1) as f64,
        mean_time_to_alarm_s: mean(&delays),
        mean_gather_ms: col(0),
        mean_process_ms: col(1),
        mean_predict_ms: col(2),
        mean_total_ms: col(3),
    }
}

/// One STA/LTA row per `trigger_on` value, then one row per model.
/// Onsets come from `onsets` (manifest path → onset seconds).
pub fn compare_stalta(
    dataset: &Dataset,
    onsets: &HashMap<String, Option<f64>>,
    base: &StaLtaConfig,
    thresholds: &[f64],
    models: &[Classifier],
    detector: &DetectorConfig,
    execution: Execution,
) -> Result<Vec<ComparisonRow>> {
    let entries = dataset.split(Split::Test);
    if entries.is_empty() {
        return Err(HarnessError::Message("manifest has no test clips".into()));
    }
    let mut rows = Vec::new();
    // the ratio series does not depend on the threshold, so compute it once
    let ratios = exec::map(execution, &entries, |e| -> Result<_> {
        let w = read_clip(&dataset.resolve(e))?;
        Ok(sta_lta_ratio(&w, base)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for &on in thresholds {
        let cfg = StaLtaConfig { trigger_on: on, trigger_off: base.trigger_off.min(on), ..base.clone() };
        cfg.validate()?;
        let outcomes: Vec<ClipOutcome> = entries
            .iter()
            .zip(&ratios)
            .map(|(e, ratio)| {
                let t = pick_onset(ratio.clone(), &cfg);
                ClipOutcome {
                    label: e.label,
                    onset_s: onsets.get(&e.path).copied().flatten(),
                    alarm_s: t.onset_time,
                    latency: Vec::new(),
                }
            })
            .collect();
        rows.push(summarize("sta_lta".into(), format!("trigger_on={on}"), &outcomes));
    }
    for clf in models {
        let outcomes = exec::map(execution, &entries, |e| -> Result<ClipOutcome> {
            let w = load_clip(&dataset.resolve(e), clf.sample_rate())?;
            let run = detect_waveform(clf, &w, f64::INFINITY, detector, &mut |_| Ok(()))?;
            let rate = clf.sample_rate() as f64;
            Ok(ClipOutcome {
                label: e.label,
                onset_s: onsets.get(&e.path).copied().flatten(),
                alarm_s: run.alarms.first().map(|a| (a.trigger_sample_index + 1) as f64 / rate),
                latency: run.alarms.iter().map(|a| [a.gather_ms, a.process_ms, a.predict_ms, a.total_ms]).collect(),
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        rows.push(summarize(clf.model.network.spec().kind.to_string(), "none".into(), &outcomes));
    }
    Ok(rows)
}
