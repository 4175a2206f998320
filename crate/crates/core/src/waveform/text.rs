//! Plain-text amplitude series: one value per line, `# rate=<Hz>` header.

use super::{Result, Waveform, WaveformError};
use std::fmt::Write;

/// Parses a CSV waveform. `rate` overrides any `# rate=` header.
pub fn read_csv(text: &str, rate: Option<u32>) -> Result<Waveform> {
    let mut header_rate = None;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("rate=") {
                let r: u32 = value
                    .trim()
                    .parse()
                    .map_err(|_| WaveformError::Parse { line: line_no, message: format!("invalid rate {value:?}") })?;
                header_rate = Some(r);
            }
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| WaveformError::Parse { line: line_no, message: format!("not a number: {line:?}") })?;
        samples.push(v);
    }
    let rate = rate.or(header_rate).ok_or(WaveformError::MissingRate)?;
    Waveform::new(samples, rate)
}

/// Inverse of [`read_csv`]; values use the shortest exact decimal form.
pub fn write_csv(w: &Waveform) -> String {
    let mut out = String::with_capacity(w.len() * 12 + 16);
    let _ = writeln!(out, "# rate={}", w.sample_rate());
    for x in w.samples() {
        let _ = writeln!(out, "{x}");
    }
    out
}
