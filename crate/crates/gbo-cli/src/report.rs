use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::jsonw::Json;
use crate::manifest::ARTIFACT_VERSION;

/// One consolidated row; populated from a run's manifest plus whichever
/// summary file the command wrote.
struct Row {
    run: String,
    command: String,
    version: String,
    p: Option<String>,
    n: Option<String>,
    kappa0: Option<f64>,
    alpha_1: Option<f64>,
    gap_exponent: Option<f64>,
    error: Option<f64>,
}

pub struct Report {
    rows: Vec<Row>,
    pub warnings: Vec<String>,
}

const SUMMARY_FILES: [&str; 5] = [
    "summary.json",
    "spectrum.json",
    "constants.json",
    "ode_summary.json",
    "sim_summary.json",
];

/// Keys probed, in order, for the consolidated error column. Each command
/// exposes its headline accuracy figure under one of these.
const ERROR_KEYS: [&str; 5] = [
    "residual",
    "velocity_residual",
    "scaled_gap_error",
    "mass_drift",
    "scaling_residual",
];

pub fn build(run_dirs: &[PathBuf]) -> Report {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut versions: BTreeSet<String> = BTreeSet::new();

    for dir in run_dirs {
        let manifest_path = dir.join("manifest.json");
        let text = match std::fs::read_to_string(&manifest_path) {
            Ok(t) => t,
            Err(_) => {
                warnings.push(format!("missing manifest in {}", dir.display()));
                continue;
            }
        };
        let manifest: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("unreadable manifest in {}: {e}", dir.display()));
                continue;
            }
        };
        let version = manifest["artifact_version"].as_str().unwrap_or("").to_string();
        versions.insert(version.clone());

        let mut row = Row {
            run: run_label(dir),
            command: manifest["command"].as_str().unwrap_or("").to_string(),
            version,
            p: param_str(&manifest, "p"),
            n: param_str(&manifest, "n"),
            kappa0: None,
            alpha_1: None,
            gap_exponent: None,
            error: None,
        };
        for name in SUMMARY_FILES {
            let Ok(text) = std::fs::read_to_string(dir.join(name)) else {
                continue;
            };
            let Ok(summary) = serde_json::from_str::<Value>(&text) else {
                warnings.push(format!("unreadable {name} in {}", dir.display()));
                continue;
            };
            harvest(&summary, &mut row);
        }
        rows.push(row);
    }

    if versions.len() > 1 {
        let list: Vec<&str> = versions.iter().map(String::as_str).collect();
        warnings.push(format!(
            "conflicting artifact versions across runs: {}",
            list.join(", ")
        ));
    }
    Report { rows, warnings }
}

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn param_str(manifest: &Value, key: &str) -> Option<String> {
    manifest["parameters"][key].as_str().map(str::to_string)
}

fn harvest(summary: &Value, row: &mut Row) {
    for key in ["kappa0_tail", "kappa0"] {
        if row.kappa0.is_none() {
            row.kappa0 = summary[key].as_f64();
        }
    }
    if row.alpha_1.is_none() {
        row.alpha_1 = summary["alpha"][0].as_f64();
    }
    if row.gap_exponent.is_none() {
        row.gap_exponent = summary["gap_exponent"].as_f64();
    }
    for key in ERROR_KEYS {
        if row.error.is_none() {
            row.error = summary[key].as_f64();
        }
    }
}

impl Report {
    pub fn to_json(&self) -> Json {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Json::Obj(vec![
                    ("run".into(), Json::str(&r.run)),
                    ("command".into(), Json::str(&r.command)),
                    ("artifact_version".into(), Json::str(&r.version)),
                    ("p".into(), opt_str(&r.p)),
                    ("n".into(), opt_str(&r.n)),
                    ("kappa0".into(), opt_num(r.kappa0)),
                    ("alpha_1".into(), opt_num(r.alpha_1)),
                    ("gap_exponent".into(), opt_num(r.gap_exponent)),
                    ("error".into(), opt_num(r.error)),
                ])
            })
            .collect();
        Json::Obj(vec![
            ("artifact_version".into(), Json::str(ARTIFACT_VERSION)),
            (
                "warnings".into(),
                Json::Arr(self.warnings.iter().map(Json::str).collect()),
            ),
            ("rows".into(), Json::Arr(rows)),
        ])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,command,artifact_version,p,n,kappa0,alpha_1,gap_exponent,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                r.command,
                r.version,
                r.p.as_deref().unwrap_or(""),
                r.n.as_deref().unwrap_or(""),
                csv_num(r.kappa0),
                csv_num(r.alpha_1),
                csv_num(r.gap_exponent),
                csv_num(r.error),
            );
        }
        out
    }
}

fn opt_str(v: &Option<String>) -> Json {
    match v {
        Some(s) => Json::str(s),
        None => Json::Null,
    }
}

fn opt_num(v: Option<f64>) -> Json {
    match v {
        Some(x) => Json::Num(x),
        None => Json::Null,
    }
}

fn csv_num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}
