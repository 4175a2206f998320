//! Binary classification metrics: confusion matrix, accuracy, Cohen's kappa.

use crate::Label;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// 2×2 confusion matrix; rows are true labels, columns are predictions,
/// both indexed by [`Label::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Label, Label)>,
    {
        let mut m = Self::default();
        for (truth, pred) in pairs {
            m.add(truth, pred);
        }
        m
    }

    pub fn add(&mut self, truth: Label, predicted: Label) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i][0] + self.counts[i][1]
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts[0][j] + self.counts[1][j]
    }

    /// Observed agreement `p_o = trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            0.0
        } else {
            self.trace() as f64 / n as f64
        }
    }

    /// Chance agreement from the product of marginals.
    pub fn expected_agreement(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        (0..2).map(|k| self.row_sum(k) as f64 * self.col_sum(k) as f64).sum::<f64>() / (n * n)
    }

    /// `(p_o - p_e) / (1 - p_e)`. When `p_e == 1` (a single class on both
    /// axes) kappa is 1 for perfect agreement and 0 otherwise.
    pub fn cohen_kappa(&self) -> f64 {
        let po = self.accuracy();
        let pe = self.expected_agreement();
        if (1.0 - pe).abs() < f64::EPSILON {
            return if po == 1.0 { 1.0 } else { 0.0 };
        }
        (po - pe) / (1.0 - pe)
    }

    /// Precision of `label`; `None` when nothing was predicted as it.
    pub fn precision(&self, label: Label) -> Option<f64> {
        let j = label.index();
        let col = self.col_sum(j);
        (col > 0).then(|| self.counts[j][j] as f64 / col as f64)
    }

    /// Recall of `label`; `None` when the label never occurs.
    pub fn recall(&self, label: Label) -> Option<f64> {
        let i = label.index();
        let row = self.row_sum(i);
        (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub cohen_kappa: f64,
    pub per_class: Vec<ClassMetrics>,
    pub config: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionMatrix, config: BTreeMap<String, String>) -> Self {
        let per_class = Label::ALL
            .iter()
            .map(|&label| ClassMetrics {
                label,
                precision: confusion.precision(label),
                recall: confusion.recall(label),
            })
            .collect();
        Self { accuracy: confusion.accuracy(), cohen_kappa: confusion.cohen_kappa(), confusion, per_class, config }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.confusion.counts;
        writeln!(f, "confusion (rows = truth, cols = predicted; 0 = non_earthquake, 1 = earthquake)")?;
        writeln!(f, "  [{:>6} {:>6}]", c[0][0], c[0][1])?;
        writeln!(f, "  [{:>6} {:>6}]", c[1][0], c[1][1])?;
        writeln!(f, "accuracy     {:.4}", self.accuracy)?;
        writeln!(f, "cohen_kappa  {:.4}", self.cohen_kappa)?;
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        for m in &self.per_class {
            writeln!(f, "{:<15} precision {} recall {}", m.label.as_str(), opt(m.precision), opt(m.recall))?;
        }
        for (k, v) in &self.config {
            writeln!(f, "# {k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement() {
        let m = ConfusionMatrix::new([[10, 0], [0, 10]]);
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.cohen_kappa(), 1.0);
    }

    #[test]
    fn hand_checked_matrix() {
        let m = ConfusionMatrix::new([[40, 10], [5, 45]]);
        assert!((m.accuracy() - 0.85).abs() < 1e-15);
        // p_e = (50·45 + 50·55) / 100² = 0.5, kappa = 0.35 / 0.5
        assert!((m.expected_agreement() - 0.5).abs() < 1e-15);
        assert!((m.cohen_kappa() - 0.7).abs() < 1e-12);
        assert_eq!(m.precision(Label::Earthquake), Some(45.0 / 55.0));
        assert_eq!(m.recall(Label::NonEarthquake), Some(0.8));
    }

    #[test]
    fn degenerate_single_class() {
        let m = ConfusionMatrix::new([[0, 0], [0, 7]]);
        assert_eq!(m.cohen_kappa(), 1.0);
        assert_eq!(m.precision(Label::NonEarthquake), None);
        let e = ConfusionMatrix::default();
        assert_eq!(e.accuracy(), 0.0);
    }

    #[test]
    fn report_consistency() {
        let m = ConfusionMatrix::from_pairs([
            (Label::Earthquake, Label::Earthquake),
            (Label::Earthquake, Label::NonEarthquake),
            (Label::NonEarthquake, Label::NonEarthquake),
        ]);
        let r = MetricsReport::from_confusion(m, BTreeMap::new());
        assert_eq!(r.accuracy, m.trace() as f64 / m.total() as f64);
        assert!(r.to_string().contains("accuracy     0.6667"));
    }
}
