//! Writing reports to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{ConvergenceReport, TableReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

fn series_csv(t: &TableReport) -> String {
    let mut out = String::from("episode,reward,running_mean,windowed_mean");
    if t.normalized_running_mean.is_some() {
        out.push_str(",normalized_running_mean");
    }
    out.push('\n');
    for i in 0..t.episodes {
        write!(out, "{},{},{},{}", i + 1, t.rewards[i], t.running_mean[i], t.windowed_mean[i]).unwrap();
        if let Some(n) = &t.normalized_running_mean {
            write!(out, ",{}", n[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn policy_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("game,loc,lof,oracle_loc\n");
    for g in 0..report.loc.final_policy.len() {
        let oracle = report.oracle.as_ref().map(|o| o.policy[g].to_string()).unwrap_or_default();
        let lof = report.lof.final_policy.get(g).map(u8::to_string).unwrap_or_default();
        writeln!(out, "{g},{},{lof},{oracle}", report.loc.final_policy[g]).unwrap();
    }
    out
}

fn summary_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("metric,value\n");
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    let last = |v: &[f64]| v.last().map(f64::to_string).unwrap_or_default();
    writeln!(out, "loc_episodes,{}", report.loc.episodes).unwrap();
    writeln!(out, "lof_episodes,{}", report.lof.episodes).unwrap();
    writeln!(out, "loc_final_running_mean,{}", last(&report.loc.running_mean)).unwrap();
    writeln!(out, "lof_final_running_mean,{}", last(&report.lof.running_mean)).unwrap();
    writeln!(out, "loc_episodes_to_stability,{}", opt(report.loc.episodes_to_stability)).unwrap();
    writeln!(out, "lof_episodes_to_stability,{}", opt(report.lof.episodes_to_stability)).unwrap();
    if let Some(o) = &report.oracle {
        writeln!(out, "oracle_agreement,{}", o.agreement).unwrap();
    }
    writeln!(out, "stability_definition,\"{}\"", report.stability_definition).unwrap();
    out
}

fn engagement_csv(series: &[f64]) -> String {
    let mut out = String::from("session,engagement_proxy\n");
    for (i, v) in series.iter().enumerate() {
        writeln!(out, "{},{v}", i + 1).unwrap();
    }
    out
}

/// Writes `report` under `dir` with file names starting with `stem`.
/// Returns the paths written.
pub fn report_emit(
    report: &ConvergenceReport,
    dir: &Path,
    stem: &str,
    format: ReportFormat,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = Vec::new();
    match format {
        ReportFormat::Json => {
            files.push((
                format!("{stem}.report.json"),
                serde_json::to_string_pretty(report).expect("report serializes"),
            ));
        }
        ReportFormat::Csv => {
            files.push((format!("{stem}.loc.csv"), series_csv(&report.loc)));
            files.push((format!("{stem}.lof.csv"), series_csv(&report.lof)));
            files.push((format!("{stem}.policy.csv"), policy_csv(report)));
            files.push((format!("{stem}.summary.csv"), summary_csv(report)));
            if let Some(e) = &report.engagement {
                files.push((format!("{stem}.engagement.csv"), engagement_csv(e)));
            }
        }
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// One line per run in an aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub loc_episodes: usize,
    pub lof_episodes: usize,
    pub loc_final_running_mean: Option<f64>,
    pub lof_final_normalized_mean: Option<f64>,
    pub loc_episodes_to_stability: Option<usize>,
    pub lof_episodes_to_stability: Option<usize>,
    pub oracle_agreement: Option<f64>,
    pub loc_policy: Vec<u8>,
    pub lof_policy: Vec<u8>,
}

impl RunSummary {
    pub fn new(name: impl Into<String>, seed: u64, report: &ConvergenceReport) -> Self {
        Self {
            name: name.into(),
            seed,
            loc_episodes: report.loc.episodes,
            lof_episodes: report.lof.episodes,
            loc_final_running_mean: report.loc.running_mean.last().copied(),
            lof_final_normalized_mean: report
                .lof
                .normalized_running_mean
                .as_ref()
                .and_then(|v| v.last().copied()),
            loc_episodes_to_stability: report.loc.episodes_to_stability,
            lof_episodes_to_stability: report.lof.episodes_to_stability,
            oracle_agreement: report.oracle.as_ref().map(|o| o.agreement),
            loc_policy: report.loc.final_policy.clone(),
            lof_policy: report.lof.final_policy.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: Vec<RunSummary>,
    pub failures: Vec<String>,
    pub mean_oracle_agreement: Option<f64>,
}

impl AggregateReport {
    pub fn new(runs: Vec<RunSummary>, failures: Vec<String>) -> Self {
        let agreements: Vec<f64> = runs.iter().filter_map(|r| r.oracle_agreement).collect();
        let mean_oracle_agreement =
            (!agreements.is_empty()).then(|| agreements.iter().sum::<f64>() / agreements.len() as f64);
        Self { runs, failures, mean_oracle_agreement }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join("aggregate.json");
        fs::write(&json, serde_json::to_string_pretty(self).expect("aggregate serializes"))?;
        let csv = dir.join("aggregate.csv");
        let mut out = String::from(
            "name,seed,loc_episodes,lof_episodes,loc_final_running_mean,lof_final_normalized_mean,\
             loc_episodes_to_stability,lof_episodes_to_stability,oracle_agreement\n",
        );
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let u = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.runs {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.name,
                r.seed,
                r.loc_episodes,
                r.lof_episodes,
                f(r.loc_final_running_mean),
                f(r.lof_final_normalized_mean),
                u(r.loc_episodes_to_stability),
                u(r.lof_episodes_to_stability),
                f(r.oracle_agreement)
            )
            .unwrap();
        }
        fs::write(&csv, out)?;
        Ok(vec![json, csv])
    }
}
