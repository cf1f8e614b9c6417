//! Rendering of aggregate reports as markdown, CSV or JSON.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::protocol::record::AggregateReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(text: &str) -> Result<ReportFormat> {
        match text.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

/// Formats a value with 3 significant digits, trailing zeros trimmed
/// ("0.273", "0.001", "2", "43500").
fn format_sig(value: f64, digits: i32) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i32;
    if !(-5..6).contains(&exponent) {
        return format!("{:.*e}", (digits - 1) as usize, value);
    }
    let decimals = (digits - 1 - exponent).max(0) as usize;
    let text = format!("{value:.decimals$}");
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// Metric names present in any report, in the canonical order first, then
/// any extras alphabetically.
fn metric_columns(reports: &[AggregateReport]) -> Vec<String> {
    let mut columns = Vec::new();
    for kind in MetricKind::all() {
        if reports.iter().any(|r| r.metrics.contains_key(kind.name())) {
            columns.push(kind.name().to_string());
        }
    }
    for report in reports {
        for name in report.metrics.keys() {
            if !columns.contains(name) {
                columns.push(name.clone());
            }
        }
    }
    columns
}

fn direction_arrow(name: &str) -> &'static str {
    match MetricKind::parse(name) {
        Ok(kind) if !kind.lower_is_better() => "\u{2191}",
        _ => "\u{2193}",
    }
}

/// Renders one row per model, one column per metric. Markdown cells show
/// `mean +/- std` at 3 significant digits with a direction arrow per
/// column; CSV and JSON carry full precision.
pub fn render_report(reports: &[AggregateReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to render".into()));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(reports).expect("reports serialize")),
        ReportFormat::Csv => {
            let columns = metric_columns(reports);
            let mut out = String::new();
            out.push_str("model");
            for name in &columns {
                write!(out, ",{name}_mean,{name}_std,{name}_n").unwrap();
            }
            out.push('\n');
            for report in reports {
                out.push_str(&escape_csv(&report.label));
                for name in &columns {
                    match report.metrics.get(name) {
                        Some(stat) => {
                            write!(out, ",{},{},{}", stat.mean, stat.std, stat.n).unwrap()
                        }
                        None => out.push_str(",,,"),
                    }
                }
                out.push('\n');
            }
            Ok(out)
        }
        ReportFormat::Markdown => {
            let columns = metric_columns(reports);
            let mut out = String::new();
            out.push_str("| Model |");
            for name in &columns {
                write!(out, " {} {} |", name, direction_arrow(name)).unwrap();
            }
            out.push('\n');
            out.push_str("| --- |");
            for _ in &columns {
                out.push_str(" --- |");
            }
            out.push('\n');
            for report in reports {
                write!(out, "| {} |", report.label).unwrap();
                for name in &columns {
                    match report.metrics.get(name) {
                        Some(stat) => write!(
                            out,
                            " {} \u{00b1} {} |",
                            format_sig(stat.mean, 3),
                            format_sig(stat.std, 3)
                        )
                        .unwrap(),
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
