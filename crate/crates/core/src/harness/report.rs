use super::{ExperimentConfig, HarnessError};
use crate::stats::Metric;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, Metric>,
    pub verdicts: BTreeMap<String, bool>,
    pub seed: u64,
    pub duration_ms: u64,
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.get(name).copied()
    }

    /// Zeroes the wall-clock field so reports compare byte for byte.
    pub fn without_timing(mut self) -> Self {
        self.duration_ms = 0;
        self
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `metric,mean,stderr,n`, one row per metric, then verdicts as
    /// `verdict:<name>` rows with mean 1 or 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,stderr,n\n");
        for (name, m) in &self.metrics {
            let _ = writeln!(out, "{name},{},{},{}", m.mean, m.stderr, m.n);
        }
        for (name, &v) in &self.verdicts {
            let _ = writeln!(out, "verdict:{name},{},0,1", v as u8);
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> Result<String, HarnessError> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => Ok(self.to_csv()),
        }
    }
}
