//! Plain-text, JSON and TSV renderings of a [`MetricsReport`].
//!
//! Values are printed in shortest round-trip form so every rendering parses
//! back to the same `f64`.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use super::MetricsReport;

pub fn to_json(report: &MetricsReport, config: Option<&Value>) -> Value {
    let mut obj = Map::new();
    if let Some(cfg) = config {
        obj.insert("config".into(), cfg.clone());
    }
    for (name, value) in report.metric_rows() {
        obj.insert(name, json!(value));
    }
    obj.insert("instance_count".into(), json!(report.instance_count));
    obj.insert("skipped_count".into(), json!(report.skipped_count));
    Value::Object(obj)
}

pub fn to_text(report: &MetricsReport, config: Option<&Value>) -> String {
    let mut out = String::new();
    if let Some(cfg) = config {
        let _ = writeln!(out, "# config: {cfg}");
    }
    let rows = report.metric_rows();
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(out, "{:<width$}  {}", "instances", report.instance_count);
    let _ = writeln!(out, "{:<width$}  {}", "skipped", report.skipped_count);
    for (name, value) in rows {
        let _ = writeln!(out, "{name:<width$}  {value}");
    }
    out
}

/// `metric<TAB>value` lines with a header.
pub fn to_tsv(report: &MetricsReport) -> String {
    let mut out = String::from("metric\tvalue\n");
    for (name, value) in report.metric_rows() {
        let _ = writeln!(out, "{name}\t{value}");
    }
    let _ = writeln!(out, "instance_count\t{}", report.instance_count);
    let _ = writeln!(out, "skipped_count\t{}", report.skipped_count);
    out
}

/// Reads the metric values back out of [`to_text`] output.
pub fn parse_text_metrics(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let mut parts = l.split_whitespace();
            let name = parts.next()?;
            let value = parts.next()?.parse().ok()?;
            name.contains('@').then(|| (name.to_string(), value))
        })
        .collect()
}
