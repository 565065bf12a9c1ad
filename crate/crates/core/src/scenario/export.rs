use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::run::{BandStats, ScenarioReport};
use crate::error::{FrfError, Result};

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn stats_json(s: &BandStats) -> Value {
    json!({
        "max_error_db": num(s.max_error_db),
        "mean_error_db": num(s.mean_error_db),
        "n_bins": s.n_bins,
        "n_defects": s.n_defects,
        "defect_fraction": num(s.defect_fraction),
    })
}

/// Config echo, error statistics, metrics and defect log.
///
/// Contains no wall-clock data, so identical configs give identical text.
pub fn summary_json(report: &ScenarioReport) -> Value {
    let estimates: Vec<Value> = report
        .estimates
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "file": format!("{}.csv", e.name),
                "estimator_tag": e.estimate.tag,
                "oracle": e.oracle.tag.name,
                "n_bins": e.estimate.n_bins(),
                "band_stats": stats_json(&e.stats),
            })
        })
        .collect();
    let defects: Vec<Value> = report
        .estimates
        .iter()
        .flat_map(|e| {
            e.estimate.defects.iter().map(move |d| {
                json!({
                    "estimate": e.name,
                    "bin": d.bin,
                    "frequency_hz": num(e.frequency_hz(d.bin)),
                    "reason": d.reason,
                })
            })
        })
        .collect();
    let metrics: serde_json::Map<String, Value> = report.metrics.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    json!({
        "scenario": report.config.scenario,
        "config": report.config,
        "seeds": report.config.seeds,
        "estimates": estimates,
        "references": report.references.iter().map(|(n, _)| format!("{n}.csv")).collect::<Vec<_>>(),
        "metrics": metrics,
        "defect_threshold_exceeded": report.defect_threshold_exceeded,
        "defects": defects,
    })
}

/// Long-format error table: one row per estimate, bin and matrix entry.
fn errors_csv(report: &ScenarioReport) -> String {
    let mut out =
        String::from("estimate,frequency_hz,output,input,excited,magnitude_db,oracle_magnitude_db,error_db\n");
    for e in &report.estimates {
        for b in 0..e.estimate.n_bins() {
            let (g, o, err) = (&e.estimate.g[b], &e.oracle.g[b], &e.error[b]);
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        e.name,
                        e.frequency_hz(b),
                        i + 1,
                        j + 1,
                        u8::from(e.excited[b]),
                        20.0 * g[(i, j)].norm().log10(),
                        20.0 * o[(i, j)].norm().log10(),
                        20.0 * err[(i, j)].log10(),
                    )
                    .expect("writing to a String");
                }
            }
        }
    }
    out
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| FrfError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every estimate and reference as CSV plus `errors.csv`,
/// `summary.json` and `runtime.json` (the only file with wall-clock data).
pub fn export_report(report: &ScenarioReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| FrfError::io(dir, e))?;
    let mut written = Vec::new();
    for e in &report.estimates {
        write(dir, &format!("{}.csv", e.name), &e.estimate.to_csv_string(), &mut written)?;
    }
    for (name, r) in &report.references {
        write(dir, &format!("{name}.csv"), &r.to_csv_string(), &mut written)?;
    }
    write(dir, "errors.csv", &errors_csv(report), &mut written)?;
    let summary = serde_json::to_string_pretty(&summary_json(report))? + "\n";
    write(dir, "summary.json", &summary, &mut written)?;
    let runtime = json!({ "started_unix_s": report.started_unix_s, "elapsed_s": report.elapsed_s });
    write(dir, "runtime.json", &(serde_json::to_string_pretty(&runtime)? + "\n"), &mut written)?;
    Ok(written)
}
