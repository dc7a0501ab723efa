use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::metrics::Interval;
use super::sweep::SweepReport;
use super::EvaluationError;

pub const REFERENCE_NOTE: &str =
    "Published figures from the original study; not reproducible without GSK2018-A + GPT-5. Never compared against fixture runs.";

/// Output files written by [`export_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub sweep: PathBuf,
    pub seeds: PathBuf,
    pub intervals: PathBuf,
    pub scatter: PathBuf,
    pub styles: PathBuf,
    pub selections: PathBuf,
    pub json: PathBuf,
    pub reference: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            sweep: d.join("sweep.csv"),
            seeds: d.join("sweep_seeds.csv"),
            intervals: d.join("sweep_ci.csv"),
            scatter: d.join("scatter.csv"),
            styles: d.join("styles.csv"),
            selections: d.join("selections.jsonl"),
            json: d.join("report.json"),
            reference: d.join("reference_values.json"),
        }
    }

    pub fn all(&self) -> [&Path; 8] {
        [
            &self.sweep,
            &self.seeds,
            &self.intervals,
            &self.scatter,
            &self.styles,
            &self.selections,
            &self.json,
            &self.reference,
        ]
    }
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".to_string())
}

fn header(report: &SweepReport, columns: &str) -> String {
    format!("# config_fingerprint={}\n{columns}\n", report.fingerprint)
}

/// One row per grid point. Stochastic strategies report seed means with
/// `seed` set to `mean`; deterministic ones leave it empty.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = header(report, "strategy,k,seed,mae,rmse,r2,mae_low,mae_high");
    for p in &report.points {
        let seed = if p.ci.is_some() { "mean" } else { "" };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.strategy,
            p.k,
            seed,
            num(p.metrics.mae),
            num(p.metrics.rmse),
            opt(p.metrics.r2),
            opt(p.stratified.low),
            opt(p.stratified.high)
        );
    }
    out
}

fn seeds_csv(report: &SweepReport) -> String {
    let mut out = header(report, "strategy,k,seed,mae,rmse,r2,mae_low,mae_high");
    for p in &report.points {
        for r in &p.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.strategy,
                p.k,
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                num(r.metrics.mae),
                num(r.metrics.rmse),
                opt(r.metrics.r2),
                opt(r.stratified.low),
                opt(r.stratified.high)
            );
        }
    }
    out
}

fn intervals_csv(report: &SweepReport) -> String {
    let mut out = header(report, "strategy,k,metric,n,mean,sd,ci_low,ci_high");
    for p in &report.points {
        let Some(ci) = &p.ci else { continue };
        let rows: [(&str, Option<&Interval>); 5] = [
            ("mae", Some(&ci.mae)),
            ("rmse", Some(&ci.rmse)),
            ("r2", ci.r2.as_ref()),
            ("mae_low", ci.mae_low.as_ref()),
            ("mae_high", ci.mae_high.as_ref()),
        ];
        for (name, iv) in rows {
            let Some(iv) = iv else { continue };
            let _ = writeln!(
                out,
                "{},{},{name},{},{},{},{},{}",
                p.strategy,
                p.k,
                iv.n,
                num(iv.mean),
                num(iv.sd),
                num(iv.lower()),
                num(iv.upper())
            );
        }
    }
    out
}

fn scatter_csv(report: &SweepReport) -> String {
    let mut out = header(report, "patient_id,y_true,y_pred,strategy,k");
    for p in &report.points {
        for s in &p.scatter {
            let _ = writeln!(out, "{},{},{},{},{}", s.patient_id, s.y_true, num(s.y_pred), p.strategy, p.k);
        }
    }
    out
}

fn styles_csv(report: &SweepReport) -> String {
    let mut out = header(report, "group,style,count");
    for group in ["low", "high"] {
        if let Some(m) = report.style_counts.counts.get(group) {
            for (style, count) in m {
                let _ = writeln!(out, "{group},{style},{count}");
            }
        }
    }
    out
}

fn selections_jsonl(report: &SweepReport) -> Result<String, EvaluationError> {
    let mut out = serde_json::to_string(&json!({"config_fingerprint": report.fingerprint}))
        .map_err(|e| EvaluationError::Report(e.to_string()))?;
    out.push('\n');
    for s in &report.selections {
        out.push_str(&serde_json::to_string(s).map_err(|e| EvaluationError::Report(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Reference figures from the original study, kept for side-by-side
/// reading of real-data runs.
pub fn reference_values() -> serde_json::Value {
    json!({
        "note": REFERENCE_NOTE,
        "stratified_mae": {
            "baseline": {"low_22_27": 2.381, "high_28_30": 1.236},
            "noise": {"low_22_27": 2.378, "high_28_30": 1.255},
            "similarity": {"low_22_27": 1.849, "high_28_30": 1.237}
        },
        "similarity_optimum": {"k": 5, "rmse": 1.7261, "r2": 0.4824},
        "augmented_components": 7
    })
}

fn write(path: &Path, contents: &str) -> Result<(), EvaluationError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes every report table. Output depends only on `report`.
pub fn export_report(report: &SweepReport, paths: &ReportPaths) -> Result<(), EvaluationError> {
    write(&paths.sweep, &sweep_csv(report))?;
    write(&paths.seeds, &seeds_csv(report))?;
    write(&paths.intervals, &intervals_csv(report))?;
    write(&paths.scatter, &scatter_csv(report))?;
    write(&paths.styles, &styles_csv(report))?;
    write(&paths.selections, &selections_jsonl(report)?)?;
    let mut json = serde_json::to_string_pretty(report).map_err(|e| EvaluationError::Report(e.to_string()))?;
    json.push('\n');
    write(&paths.json, &json)?;
    let mut reference = serde_json::to_string_pretty(&json!({
        "config_fingerprint": report.fingerprint,
        "reference": reference_values(),
    }))
    .map_err(|e| EvaluationError::Report(e.to_string()))?;
    reference.push('\n');
    write(&paths.reference, &reference)?;
    Ok(())
}
