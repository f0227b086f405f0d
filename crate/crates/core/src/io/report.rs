use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;

use super::FormatError;
use crate::metric::{MetricConfig, SimilarityReport, TargetSize};

pub const REPORT_SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(FormatError::UnknownReportFormat(other.to_string())),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// A batch of set-pair comparisons made under one config.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    config: MetricConfig,
    pairs: Vec<SimilarityReport>,
}

impl Report {
    /// All pairs must carry `config`'s fingerprint and the same stage order.
    pub fn new(config: MetricConfig, pairs: Vec<SimilarityReport>) -> Result<Self, FormatError> {
        let fingerprint = config.fingerprint();
        if let Some(p) = pairs.iter().find(|p| p.config_fingerprint != fingerprint) {
            return Err(FormatError::Report(format!(
                "pair {}/{} has fingerprint {}, report uses {fingerprint}",
                p.set_a, p.set_b, p.config_fingerprint
            )));
        }
        if let Some(first) = pairs.first() {
            let stages: Vec<_> = first.scores.iter().map(|(s, _)| s).collect();
            for p in &pairs[1..] {
                if !p.scores.iter().map(|(s, _)| s).eq(stages.iter().copied()) {
                    return Err(FormatError::Report(format!(
                        "pair {}/{} has a different stage layout",
                        p.set_a, p.set_b
                    )));
                }
            }
        }
        Ok(Self { config, pairs })
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    pub fn pairs(&self) -> &[SimilarityReport] {
        &self.pairs
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    tool_version: &'a str,
    fingerprint: String,
    config: JsonConfig<'a>,
    pairs: Vec<JsonPair<'a>>,
}

#[derive(Serialize)]
struct JsonConfig<'a> {
    temperature: f64,
    target_size: TargetSize,
    exclude_below: u8,
    quantization: &'a str,
    provenance: &'a str,
}

#[derive(Serialize)]
struct JsonPair<'a> {
    set_a: &'a str,
    set_b: &'a str,
    scores: IndexMap<&'a str, f64>,
}

/// Serializes a report as pretty JSON or as a CSV table with one row per set
/// pair and one column per stage. Output is byte-stable for equal inputs.
pub fn write_report(report: &Report, format: ReportFormat) -> Result<Vec<u8>, FormatError> {
    match format {
        ReportFormat::Json => {
            let cfg = &report.config;
            let doc = JsonReport {
                schema: REPORT_SCHEMA,
                tool_version: TOOL_VERSION,
                fingerprint: cfg.fingerprint(),
                config: JsonConfig {
                    temperature: cfg.temperature,
                    target_size: cfg.target_size,
                    exclude_below: cfg.exclude_below,
                    quantization: &cfg.quantization,
                    provenance: &cfg.provenance,
                },
                pairs: report
                    .pairs
                    .iter()
                    .map(|p| JsonPair {
                        set_a: &p.set_a,
                        set_b: &p.set_b,
                        scores: p.scores.iter().map(|(s, d)| (s.as_str(), *d)).collect(),
                    })
                    .collect(),
            };
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| FormatError::Report(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let stages: Vec<&str> = report
                .pairs
                .first()
                .map(|p| p.scores.iter().map(|(s, _)| s.as_str()).collect())
                .unwrap_or_default();
            let mut header = vec!["set_a", "set_b"];
            header.extend(&stages);
            header.push("fingerprint");
            let csv_err = |e: csv::Error| FormatError::Report(e.to_string());
            w.write_record(&header).map_err(csv_err)?;
            let fingerprint = report.config.fingerprint();
            for p in &report.pairs {
                let mut row = vec![p.set_a.clone(), p.set_b.clone()];
                row.extend(p.scores.iter().map(|(_, d)| format!("{d:.4}")));
                row.push(fingerprint.clone());
                w.write_record(&row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| FormatError::Report(e.to_string()))
        }
    }
}
