use super::{ExperimentReport, HarnessError};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

const CONFIG_COLUMNS: [&str; 11] = [
    "scenario",
    "seed",
    "trials",
    "db_size",
    "substrings",
    "check_fraction",
    "eta",
    "group_size",
    "raw_length",
    "group_count",
    "significance",
];

/// One CSV row per report: the swept parameters, then `<metric>` and
/// `<metric>_stderr` for every metric, then `verdict:<name>` as 1/0.
/// All reports must come from the same scenario.
pub fn summarize(reports: &[ExperimentReport]) -> Result<String, HarnessError> {
    if let Some(first) = reports.first() {
        if let Some(other) = reports
            .iter()
            .find(|r| r.config.scenario != first.config.scenario)
        {
            return Err(HarnessError::Summarize(format!(
                "mixed scenarios {} and {}",
                first.config.scenario, other.config.scenario
            )));
        }
    }
    let metrics: BTreeSet<&str> = reports
        .iter()
        .flat_map(|r| r.metrics.keys().map(String::as_str))
        .collect();
    let verdicts: BTreeSet<&str> = reports
        .iter()
        .flat_map(|r| r.verdicts.keys().map(String::as_str))
        .collect();

    let mut header: Vec<String> = CONFIG_COLUMNS.iter().map(|c| c.to_string()).collect();
    for m in &metrics {
        header.push(m.to_string());
        header.push(format!("{m}_stderr"));
    }
    header.extend(verdicts.iter().map(|v| format!("verdict:{v}")));
    let mut out = header.join(",");
    out.push('\n');

    for r in reports {
        let c = &r.config;
        let mut row = vec![
            c.scenario.to_string(),
            r.seed.to_string(),
            c.trials.to_string(),
            c.db_size.to_string(),
            c.substrings.to_string(),
            c.check_fraction.to_string(),
            c.eta.to_string(),
            c.group_size.to_string(),
            c.raw_length.to_string(),
            c.group_count.to_string(),
            c.significance.to_string(),
        ];
        for m in &metrics {
            match r.metrics.get(*m) {
                Some(v) => {
                    row.push(v.mean.to_string());
                    row.push(v.stderr.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        for v in &verdicts {
            row.push(
                r.verdicts
                    .get(*v)
                    .map_or(String::new(), |&b| (b as u8).to_string()),
            );
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

pub fn summarize_files<P: AsRef<Path>>(paths: &[P]) -> Result<String, HarnessError> {
    let reports = paths
        .iter()
        .map(|p| ExperimentReport::load(p.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(&reports)
}
