//! Report bundle layout and the summary grid.
//!
//! ```text
//! <out>/scenarios.json                  scenario names in evaluation order
//! <out>/summary.txt                     the printed grid
//! <out>/<scenario>/evaluation.json      full report, read back by `report`
//! <out>/<scenario>/metrics.json         every scalar metric
//! <out>/<scenario>/importance_top10.csv
//! <out>/<scenario>/pca_projection.csv   pc1..pcN,label
//! <out>/<scenario>/<set>/<model>/confusion.csv
//! <out>/<scenario>/<set>/<model>/report_per_class.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};

use har_core::eval::{EvaluationReport, ModelResult};

use crate::commands::write_file;

pub const SCENARIO_INDEX: &str = "scenarios.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const METRICS_FILE: &str = "metrics.json";

fn model_metrics(m: &ModelResult) -> Value {
    let r = &m.report;
    json!({
        "accuracy": m.accuracy,
        "mean_fold_accuracy": m.mean_fold_accuracy,
        "fold_accuracy": m.fold_accuracy,
        "macro_precision": r.macro_avg.precision,
        "macro_recall": r.macro_avg.recall,
        "macro_f1": r.macro_avg.f1,
        "weighted_precision": r.weighted_avg.precision,
        "weighted_recall": r.weighted_avg.recall,
        "weighted_f1": r.weighted_avg.f1,
        "per_class": r.per_class.iter().map(|c| json!({
            "class": c.class,
            "precision": c.precision,
            "recall": c.recall,
            "f1": c.f1,
            "support": c.support,
        })).collect::<Vec<_>>(),
    })
}

/// All scalar results of one scenario.
pub fn metrics_json(report: &EvaluationReport) -> Value {
    let variants: serde_json::Map<String, Value> = report
        .variants
        .iter()
        .map(|v| {
            let models: serde_json::Map<String, Value> =
                v.models.iter().map(|m| (m.name.clone(), model_metrics(m))).collect();
            (
                v.feature_set.name(),
                json!({ "n_features": v.n_features, "models": models }),
            )
        })
        .collect();
    json!({
        "scenario": report.scenario.name,
        "classes": report.classes,
        "n_rows": report.n_rows,
        "n_features": report.n_features,
        "n_folds": report.folds.k(),
        "seed": report.options.seed,
        "variants": variants,
        "pca_explained_ratio": report.pca.explained_ratio,
    })
}

fn to_json_pretty(v: &impl serde::Serialize) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Write one scenario's artifacts below `out`.
pub fn write_bundle(out: &Path, report: &EvaluationReport) -> anyhow::Result<()> {
    let dir = out.join(&report.scenario.name);
    let name = |c: u8| report.class_name(c);
    let full = to_json_pretty(report)?;
    write_file(&dir.join(EVALUATION_FILE), |w| w.write_all(full.as_bytes()))?;
    let metrics = to_json_pretty(&metrics_json(report))?;
    write_file(&dir.join(METRICS_FILE), |w| w.write_all(metrics.as_bytes()))?;
    write_file(&dir.join("importance_top10.csv"), |w| report.importance.write_csv(w, Some(10)))?;
    let labels: Vec<String> = report.labels.iter().map(|&c| name(c)).collect();
    write_file(&dir.join("pca_projection.csv"), |w| report.pca.write_projection_csv(w, &labels))?;
    for v in &report.variants {
        for m in &v.models {
            let mdir = dir.join(v.feature_set.name()).join(&m.name);
            write_file(&mdir.join("confusion.csv"), |w| m.confusion.write_csv(w, name))?;
            write_file(&mdir.join("report_per_class.csv"), |w| m.report.write_csv(w, name))?;
        }
    }
    Ok(())
}

/// Record the scenario order of a run.
pub fn write_index(out: &Path, reports: &[EvaluationReport]) -> anyhow::Result<()> {
    let names: Vec<&str> = reports.iter().map(|r| r.scenario.name.as_str()).collect();
    let text = to_json_pretty(&names)?;
    write_file(&out.join(SCENARIO_INDEX), |w| w.write_all(text.as_bytes()))
}

/// Read back every scenario listed in the bundle index.
pub fn read_bundle(out: &Path) -> anyhow::Result<Vec<EvaluationReport>> {
    let index = out.join(SCENARIO_INDEX);
    let text = fs::read_to_string(&index).with_context(|| format!("reading {}", index.display()))?;
    let names: Vec<String> = serde_json::from_str(&text).with_context(|| format!("parsing {}", index.display()))?;
    names
        .iter()
        .map(|n| {
            let path = out.join(n).join(EVALUATION_FILE);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        })
        .collect()
}

/// Pooled accuracy (%) per scenario, feature set and model.
pub fn summary_grid(reports: &[EvaluationReport]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for v in reports.iter().flat_map(|r| &r.variants) {
        for m in &v.models {
            if !columns.contains(&m.name) {
                columns.push(m.name.clone());
            }
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<18} {:<9} {:>5}", "scenario", "features", "n");
    for c in &columns {
        let _ = write!(out, " {:>10}", c);
    }
    out.push('\n');
    for r in reports {
        for v in &r.variants {
            let _ = write!(out, "{:<18} {:<9} {:>5}", r.scenario.name, v.feature_set.name(), v.n_features);
            for c in &columns {
                match v.model(c) {
                    Some(m) => {
                        let _ = write!(out, " {:>10.2}", 100.0 * m.accuracy);
                    }
                    None => {
                        let _ = write!(out, " {:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}
