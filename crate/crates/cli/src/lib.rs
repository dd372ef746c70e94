//! Experiment runner for the discrete-model / mean-field convergence triangle.
//!
//! [`run_triangle`] compares, for every instance and every `(n, M, K, seed)`,
//! the empirical families of the Kuramoto model sampled from `K A K`, the
//! mean-field solution for `K A K` and the mean-field solution for `A`. Results
//! go to per-instance CSVs, a JSON manifest and SVG plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{ExperimentConfig, Instance, ScalePoint};
pub use error::CliError;
pub use experiment::{run_discrete_scaling, run_triangle};
pub use plot::emit_plots;
pub use report::{ConvergenceReport, ReportRow, ScalingReport, TrendCheck};

#[derive(Debug, Serialize)]
pub struct CheckSummary {
    pub passed: bool,
    pub violations: Vec<String>,
}

impl From<&TrendCheck> for CheckSummary {
    fn from(c: &TrendCheck) -> Self {
        Self {
            passed: c.passed(),
            violations: c.violations.clone(),
        }
    }
}

/// Everything needed to rerun a command: its name, the full config and the thread count.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub threads: usize,
    pub config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
    pub elapsed_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSummary>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig) -> Self {
        Self {
            tool: "graphop",
            version: env!("CARGO_PKG_VERSION"),
            command,
            threads: rayon::current_num_threads(),
            config,
            parameters: serde_json::Value::Null,
            outputs: Vec::new(),
            elapsed_seconds: 0.0,
            check: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&p, text + "\n")?;
        Ok(p)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Per-instance CSVs, failures, medians and plots of a triangle report.
pub fn write_triangle_outputs(report: &ConvergenceReport, dir: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for inst in report.instances() {
        let name = format!("triangle_{inst}.csv");
        std::fs::write(dir.join(&name), report.to_csv(&inst))?;
        out.push(name);
    }
    if let Some(f) = report.failures_csv() {
        std::fs::write(dir.join("failures.csv"), f)?;
        out.push("failures.csv".into());
    }
    let medians: serde_json::Map<String, serde_json::Value> = report
        .instances()
        .into_iter()
        .map(|i| {
            let m = serde_json::to_value(report.medians(&i)).expect("plain data");
            (i, m)
        })
        .collect();
    std::fs::write(
        dir.join("medians.json"),
        serde_json::to_string_pretty(&medians).expect("plain data") + "\n",
    )?;
    out.push("medians.json".into());
    for p in emit_plots(report, &dir.join("plots"))? {
        out.push(format!("plots/{}", file_name(&p)));
    }
    Ok(out)
}

pub fn write_scaling_outputs(report: &ScalingReport, dir: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut instances: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !instances.contains(&r.instance.as_str()) {
            instances.push(&r.instance);
        }
    }
    let mut out = Vec::new();
    for inst in instances {
        let name = format!("scaling_{inst}.csv");
        std::fs::write(dir.join(&name), report.to_csv(inst))?;
        out.push(name);
    }
    Ok(out)
}
