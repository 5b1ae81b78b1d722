use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::criteria::{LossBreakdown, LossWeights};
use crate::error::{Error, Result};

/// Metrics for one evaluated utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRow {
    pub id: String,
    pub mcd_db: f64,
    pub boundary_discontinuity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub weights: LossWeights,
    pub tau: f64,
    pub lambda: f64,
    pub seeds: Vec<u64>,
}

/// Arithmetic mean and sample standard deviation (0 for a single row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub rows: Vec<UtteranceRow>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub config: RunConfig,
    pub tool_version: String,
}

/// Aggregates `mcd_db`, `boundary_discontinuity` and, when every row has a
/// loss breakdown, `loss_total`.
pub fn make_report(rows: Vec<UtteranceRow>, config: RunConfig) -> Result<ReportDoc> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("report needs at least one row".into()));
    }
    let mut aggregates = BTreeMap::new();
    let column = |f: fn(&UtteranceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    if let Some(a) = Aggregate::of(&column(|r| r.mcd_db)) {
        aggregates.insert("mcd_db".to_string(), a);
    }
    if let Some(a) = Aggregate::of(&column(|r| r.boundary_discontinuity)) {
        aggregates.insert("boundary_discontinuity".to_string(), a);
    }
    let totals: Option<Vec<f64>> = rows.iter().map(|r| r.loss.map(|l| l.total)).collect();
    if let Some(a) = totals.as_deref().and_then(Aggregate::of) {
        aggregates.insert("loss_total".to_string(), a);
    }
    Ok(ReportDoc {
        rows,
        aggregates,
        config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn emit_report<W: Write>(doc: &ReportDoc, mut sink: W) -> Result<()> {
    let value = serde_json::to_value(doc)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    sink.write_all(text.as_bytes())?;
    Ok(())
}

pub fn parse_report(text: &str) -> Result<ReportDoc> {
    Ok(serde_json::from_str(text)?)
}
