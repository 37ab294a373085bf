//! Report assembly and emission. A run produces one `report.json`
//! (schema_version "1"), one long-format `metrics.csv`, and the trace CSVs
//! the replicates wrote. Nothing here depends on wall-clock time, so a
//! re-run with the same config and seeds reproduces every byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: &str = "1";

/// How bandit cumulative rewards are scaled before cross-policy
/// comparison; echoed into the report header.
pub const NORMALIZATION: &str = "cumulative_reward / (T * max_degree)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub seed: u64,
    /// File names relative to the output directory.
    pub trace_files: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub kind: String,
    pub normalization: String,
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateReport>,
    /// Median/quartiles per metric across replicates.
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Medians of the per-instance closed-form bound quantities.
    pub bounds: BTreeMap<String, f64>,
}

/// Midpoint median; quartiles are medians of the halves excluding the
/// middle element when the count is odd (Tukey's exclusive hinges). Two
/// values therefore aggregate to median = their mean, q1/q3 = the values.
pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics must be comparable"));
    let median = midpoint(&sorted);
    let n = sorted.len();
    let half = n / 2;
    let (lower, upper) = if n == 1 {
        (&sorted[..], &sorted[..])
    } else {
        (&sorted[..half], &sorted[n - half..])
    };
    Some(Aggregate {
        median,
        q1: midpoint(lower),
        q3: midpoint(upper),
    })
}

fn midpoint(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

const BOUND_KEYS: [&str; 6] = ["b0", "bstar", "bcross", "c", "blag_bound", "cucb_bound"];

pub fn build_report(config: &ExperimentConfig, replicates: Vec<ReplicateReport>) -> ExperimentReport {
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rep in &replicates {
        for (key, value) in &rep.metrics {
            by_metric.entry(key.clone()).or_default().push(*value);
        }
    }
    let aggregates: BTreeMap<String, Aggregate> = by_metric
        .iter()
        .filter_map(|(k, vs)| aggregate(vs).map(|a| (k.clone(), a)))
        .collect();
    let bounds: BTreeMap<String, f64> = BOUND_KEYS
        .iter()
        .filter_map(|&k| aggregates.get(k).map(|a| (k.to_string(), a.median)))
        .collect();
    ExperimentReport {
        schema_version: SCHEMA_VERSION.to_string(),
        kind: config.kind.map(|k| k.as_str().to_string()).unwrap_or_default(),
        normalization: NORMALIZATION.to_string(),
        config: config.clone(),
        replicates,
        aggregates,
        bounds,
    }
}

pub fn write_report(report: &ExperimentReport, dir: &Path) -> anyhow::Result<()> {
    let path = dir.join("report.json");
    let mut body = serde_json::to_string_pretty(report)
        .with_context(|| format!("serializing report for {}", path.display()))?;
    body.push('\n');
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Long-format `seed,metric,value`, replicates in config order, metrics
/// alphabetical within a replicate.
pub fn write_metrics_csv(replicates: &[ReplicateReport], dir: &Path) -> anyhow::Result<()> {
    let path = dir.join("metrics.csv");
    let mut buf = Vec::new();
    writeln!(buf, "seed,metric,value").unwrap();
    for rep in replicates {
        for (key, value) in &rep.metrics {
            writeln!(buf, "{},{},{}", rep.seed, key, value).unwrap();
        }
    }
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
