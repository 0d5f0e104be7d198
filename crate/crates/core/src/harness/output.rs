use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{histogram, line_chart, Series};
use super::{ExperimentConfig, ExperimentRun, Summary, SweepPoint, TrialRecord};
use crate::bounds::BoundReport;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "trial_index,estimation_error,prediction_error,s_min_empirical,\
excess_risk_at_interpolant,exclusion_ok,within_rho,within_r_star";

/// The JSON document written next to the trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub config: ExperimentConfig,
    pub bound_report: BoundReport,
    pub summary: Summary,
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 + 160 * records.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.trial_index,
            num(r.estimation_error),
            num(r.prediction_error),
            num(r.s_min_empirical),
            num(r.excess_risk_at_interpolant),
            r.exclusion_ok,
            r.within_rho,
            r.within_r_star
        ));
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes whichever of CSV, JSON and SVG plots `config.outputs` asks for.
/// Returns the paths written.
pub fn emit_outputs(run: &ExperimentRun, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let outputs = &config.outputs;
    if let Some(path) = &outputs.csv_path {
        write(path, &records_to_csv(&run.records))?;
        written.push(path.clone());
    }
    if let Some(path) = &outputs.json_path {
        let doc = RunDocument {
            config: config.clone(),
            bound_report: run.report.clone(),
            summary: run.summary.clone(),
        };
        write(path, &serde_json::to_string_pretty(&doc)?)?;
        written.push(path.clone());
    }
    if let (Some(dir), false) = (&outputs.plot_dir, run.records.is_empty()) {
        let pred: Vec<f64> = run.records.iter().map(|r| r.prediction_error).collect();
        let smin: Vec<f64> = run.records.iter().map(|r| r.s_min_empirical).collect();
        let plots = [
            (
                "prediction_error.svg",
                histogram(
                    &pred,
                    Some(("r*", run.report.r_star)),
                    "Prediction error",
                    "prediction error",
                ),
            ),
            (
                "s_min.svg",
                histogram(
                    &smin,
                    Some(("bound", run.report.s_min_bound)),
                    "Smallest singular value",
                    "s_min(X)",
                ),
            ),
        ];
        for (name, svg) in plots {
            let path = dir.join(name);
            write(&path, &svg)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `sweep.csv`, `sweep.json` and a line chart of mean prediction error.
pub fn emit_sweep_outputs(points: &[SweepPoint], var_name: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csv = format!(
        "{var_name},rho,r_star,coverage_rho,coverage_r_star,mean_estimation_error,mean_prediction_error,error\n"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), num);
    for p in points {
        let s = p.summary.as_ref();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            num(p.value),
            opt(p.rho),
            opt(p.r_star),
            opt(s.map(|s| s.coverage_rho)),
            opt(s.map(|s| s.coverage_r_star)),
            opt(s.map(|s| s.mean_estimation_error)),
            opt(s.map(|s| s.mean_prediction_error)),
            p.error.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    let csv_path = dir.join("sweep.csv");
    write(&csv_path, &csv)?;
    let json_path = dir.join("sweep.json");
    write(&json_path, &serde_json::to_string_pretty(points)?)?;
    let mut written = vec![csv_path, json_path];
    let collect = |f: fn(&SweepPoint) -> Option<f64>| -> Vec<(f64, f64)> {
        points.iter().filter_map(|p| f(p).map(|y| (p.value, y))).collect()
    };
    let empirical = collect(|p| p.summary.as_ref().map(|s| s.mean_prediction_error));
    if !empirical.is_empty() {
        let series = [
            Series {
                label: "mean prediction error",
                points: empirical,
            },
            Series {
                label: "r*",
                points: collect(|p| p.r_star),
            },
        ];
        let path = dir.join("sweep.svg");
        write(&path, &line_chart(&series, "Risk sweep", var_name, "prediction error"))?;
        written.push(path);
    }
    Ok(written)
}
