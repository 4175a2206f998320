//! Model × rate × window grid with CSV and SVG bar-chart output.

use super::commands::{eval_classifier, feature_setup, train_classifier, TrainRequest};
use super::data::Dataset;
use super::{HarnessError, Result};
use crate::exec::{self, Execution};
use crate::features::{FeatureConfig, FeatureKind};
use crate::nn::{LstmReadout, ModelKind, TrainConfig};
use crate::waveform::Split;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub windows_s: Vec<f64>,
    pub rates_hz: Vec<u32>,
    pub models: Vec<ModelKind>,
    pub feature_kind: FeatureKind,
    pub readout: LstmReadout,
    /// Frame, stride and filterbank settings; the rate is set per cell.
    pub features: FeatureConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            windows_s: vec![0.1, 0.2, 0.5, 1.0],
            rates_hz: vec![200, 1000],
            models: vec![ModelKind::Cnn, ModelKind::Lstm],
            feature_kind: FeatureKind::Mfcc,
            readout: LstmReadout::LastStep,
            features: FeatureConfig::reference(1000),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows_s.is_empty() || self.rates_hz.is_empty() || self.models.is_empty() {
            return Err(HarnessError::Message("sweep grid has an empty axis".into()));
        }
        self.train.validate()?;
        for &rate in &self.rates_hz {
            for &w in &self.windows_s {
                let setup = feature_setup(&self.features, rate, w, self.feature_kind);
                setup.config.validate()?;
                if setup.config.frame_count(setup.window_samples()) == 0 {
                    return Err(HarnessError::Message(format!("a {w} s window at {rate} Hz holds no complete frame")));
                }
            }
        }
        Ok(())
    }

    /// Grid cells in row order: model, then rate, then window.
    pub fn cells(&self) -> Vec<(ModelKind, u32, f64)> {
        let mut out = Vec::new();
        for &m in &self.models {
            for &r in &self.rates_hz {
                for &w in &self.windows_s {
                    out.push((m, r, w));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub rate_hz: u32,
    pub window_s: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub kappa: f64,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.test_acc.is_nan()
    }
}

pub const SWEEP_HEADER: &str = "model,rate_hz,window_s,train_acc,test_acc,kappa";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.model, r.rate_hz, r.window_s, r.train_acc, r.test_acc, r.kappa
        );
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(HarnessError::Message(format!("sweep CSV must start with {SWEEP_HEADER}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || HarnessError::Message(format!("sweep CSV line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(SweepRow {
                model: f[0].parse().map_err(|_| bad())?,
                rate_hz: f[1].parse().map_err(|_| bad())?,
                window_s: num(f[2])?,
                train_acc: num(f[3])?,
                test_acc: num(f[4])?,
                kappa: num(f[5])?,
            })
        })
        .collect()
}

/// Trains and scores every cell. A failing cell is logged and reported
/// with NaN metrics; the rest of the grid still runs. Each cell's seed is
/// the base seed plus its index, so parallel and serial runs agree.
pub fn run_sweep(dataset: &Dataset, config: &ExperimentConfig, execution: Execution) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let cells: Vec<(usize, (ModelKind, u32, f64))> = config.cells().into_iter().enumerate().collect();
    let rows = exec::map(execution, &cells, |&(i, (model, rate, window))| {
        let req = TrainRequest {
            kind: model,
            readout: config.readout,
            setup: feature_setup(&config.features, rate, window, config.feature_kind),
            train: TrainConfig {
                rng_seed: config.train.rng_seed.wrapping_add(i as u64),
                execution,
                ..config.train.clone()
            },
        };
        let outcome = train_classifier(dataset, &req).and_then(|(clf, _, train_acc)| {
            let report = eval_classifier(&clf, dataset, Split::Test, execution)?;
            Ok((train_acc, report.accuracy, report.cohen_kappa))
        });
        let (train_acc, test_acc, kappa) = outcome.unwrap_or_else(|e| {
            log::error!("sweep cell {model}/{rate} Hz/{window} s failed: {e}");
            (f64::NAN, f64::NAN, f64::NAN)
        });
        log::info!("{model} {rate} Hz {window} s: train {train_acc:.4} test {test_acc:.4} kappa {kappa:.4}");
        SweepRow { model, rate_hz: rate, window_s: window, train_acc, test_acc, kappa }
    });
    Ok(rows)
}

/// A named column of a sweep row.
pub type Series<'a> = (&'a str, fn(&SweepRow) -> f64);

/// Grouped vertical bar chart: one group per (rate, window), one bar per
/// (model, series). Output depends only on the rows.
pub fn bar_chart(rows: &[SweepRow], title: &str, series: &[Series<'_>]) -> String {
    const COLORS: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"];
    let mut groups: Vec<(u32, f64)> = Vec::new();
    let mut models: Vec<ModelKind> = Vec::new();
    for r in rows {
        if !groups.iter().any(|&(g, w)| g == r.rate_hz && w == r.window_s) {
            groups.push((r.rate_hz, r.window_s));
        }
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let bars = models.len() * series.len();
    let (bar_w, gap, left, top, plot_h) = (18.0, 24.0, 60.0, 40.0, 240.0);
    let group_w = bars as f64 * bar_w + gap;
    let width = left + groups.len() as f64 * group_w + 20.0;
    let height = top + plot_h + 90.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{title}</text>"#, width / 2.0);
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, width - 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, left - 6.0, y + 4.0);
    }
    for (gi, &(rate, window)) in groups.iter().enumerate() {
        let gx = left + gi as f64 * group_w + gap / 2.0;
        for (mi, &model) in models.iter().enumerate() {
            let row = rows.iter().find(|r| r.model == model && r.rate_hz == rate && r.window_s == window);
            for (si, (_, get)) in series.iter().enumerate() {
                let idx = mi * series.len() + si;
                let x = gx + idx as f64 * bar_w;
                let v = row.map(get).unwrap_or(f64::NAN);
                if v.is_finite() {
                    let h = plot_h * v.clamp(0.0, 1.0);
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{model} {rate} Hz {window} s: {v:.4}</title></rect>"#,
                        top + plot_h - h,
                        bar_w - 2.0,
                        COLORS[idx % COLORS.len()]
                    );
                } else {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">x</text>"#,
                        x + bar_w / 2.0,
                        top + plot_h - 4.0
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{rate} Hz / {window} s</text>"#,
            gx + bars as f64 * bar_w / 2.0,
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(s, r##"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="#333"/>"##, top + plot_h);
    let mut lx = left;
    for (mi, model) in models.iter().enumerate() {
        for (si, (name, _)) in series.iter().enumerate() {
            let idx = mi * series.len() + si;
            let y = top + plot_h + 40.0 + 0.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
                y - 9.0,
                COLORS[idx % COLORS.len()]
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{model} {name}</text>"#, lx + 14.0);
            lx += 120.0;
        }
    }
    s.push_str("</svg>\n");
    s
}

/// The two sweep charts, rebuilt from CSV text.
pub fn charts_from_csv(csv: &str) -> Result<Vec<(&'static str, String)>> {
    let rows = parse_sweep_csv(csv)?;
    Ok(vec![
        (
            "sweep_accuracy.svg",
            bar_chart(&rows, "Training and testing accuracy", &[("train", |r| r.train_acc), ("test", |r| r.test_acc)]),
        ),
        (
            "sweep_kappa.svg",
            bar_chart(&rows, "Testing accuracy and Cohen kappa", &[("test", |r| r.test_acc), ("kappa", |r| r.kappa)]),
        ),
    ])
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub charts: Vec<PathBuf>,
}

pub fn cmd_sweep(
    manifest: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
    execution: Execution,
) -> Result<SweepReport> {
    let dataset = Dataset::load(manifest)?;
    let rows = run_sweep(&dataset, config, execution)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let text = sweep_csv(&rows);
    let csv = out_dir.join("sweep.csv");
    fs::write(&csv, &text).map_err(|e| HarnessError::io(&csv, e))?;
    let mut charts = Vec::new();
    for (name, svg) in charts_from_csv(&text)? {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(|e| HarnessError::io(&path, e))?;
        charts.push(path);
    }
    Ok(SweepReport { rows, csv, charts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow { model: ModelKind::Cnn, rate_hz: 200, window_s: 0.2, train_acc: 0.9, test_acc: 0.8, kappa: 0.6 },
            SweepRow {
                model: ModelKind::Lstm,
                rate_hz: 200,
                window_s: 0.2,
                train_acc: 1.0,
                test_acc: 0.95,
                kappa: 0.9,
            },
            SweepRow {
                model: ModelKind::Cnn,
                rate_hz: 1000,
                window_s: 0.2,
                train_acc: f64::NAN,
                test_acc: f64::NAN,
                kappa: f64::NAN,
            },
        ]
    }

    #[test]
    fn grid_arithmetic() {
        let cfg = ExperimentConfig { windows_s: vec![0.2], ..Default::default() };
        assert_eq!(cfg.cells().len(), 4);
        assert_eq!(ExperimentConfig::default().cells().len(), 16);
        cfg.validate().unwrap();
    }

    #[test]
    fn csv_round_trip_and_header() {
        let text = sweep_csv(&rows());
        assert!(text.starts_with("model,rate_hz,window_s,train_acc,test_acc,kappa\n"));
        let back = parse_sweep_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert!(back[2].failed());
        assert_eq!(sweep_csv(&back), text);
    }

    #[test]
    fn charts_regenerate_identically() {
        let text = sweep_csv(&rows());
        let a = charts_from_csv(&text).unwrap();
        let b = charts_from_csv(&text).unwrap();
        assert_eq!(a, b);
        assert!(a[0].1.starts_with("<svg"));
        assert!(a[0].1.contains("200 Hz / 0.2 s"));
    }
}
