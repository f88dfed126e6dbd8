use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::{error_bound, mean};
use super::study::{DifficultyCorrelation, PermutationStudy, StudyMode};
use crate::datasets::RunOrder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// `None` with fewer than two runs.
    pub eb: Option<f64>,
}

impl MetricSummary {
    pub fn new(values: Vec<f64>, confidence: f64) -> Result<Self> {
        let m = mean(&values)?;
        let eb = if values.len() >= 2 { Some(error_bound(&values, confidence)?) } else { None };
        Ok(Self { values, mean: m, eb })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub order: RunOrder,
    pub acc_a: f64,
    pub acc_w: f64,
    pub final_acc: Vec<f64>,
    pub acc_a_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    pub study_mode: StudyMode,
    pub num_tasks: usize,
    pub confidence: f64,
    pub acc_w: MetricSummary,
    pub acc_a: MetricSummary,
    pub runs: Vec<RunSummary>,
    /// `position_table[position][task]`.
    pub position_table: Vec<Vec<Option<f64>>>,
    pub column_mean: Vec<Option<f64>>,
    pub column_std: Vec<Option<f64>>,
    pub forgetting: Vec<Option<f64>>,
    pub prior_difficulty: Option<Vec<f64>>,
    pub pcc: Option<f64>,
    pub warnings: Vec<String>,
    pub config: Value,
    pub seeds: Value,
}

impl MetricsReport {
    pub fn build(
        strategy: &str,
        study: &PermutationStudy,
        confidence: f64,
        correlation: Option<&DifficultyCorrelation>,
        config: Value,
        seeds: Value,
    ) -> Result<Self> {
        let fr = study.forgetting();
        let (column_mean, column_std) = study.column_stats();
        let mut warnings = fr.warnings.clone();
        if let Some(c) = correlation {
            for w in &c.warnings {
                if !warnings.contains(w) {
                    warnings.push(w.clone());
                }
            }
        }
        Ok(Self {
            strategy: strategy.to_string(),
            study_mode: study.mode,
            num_tasks: study.num_tasks,
            confidence,
            acc_w: MetricSummary::new(study.acc_w_values(), confidence)?,
            acc_a: MetricSummary::new(study.acc_a_values(), confidence)?,
            runs: study
                .records
                .iter()
                .map(|r| RunSummary {
                    run_id: r.run_id,
                    order: r.order.clone(),
                    acc_a: r.acc_a,
                    acc_w: r.acc_w,
                    final_acc: r.final_acc.clone(),
                    acc_a_trace: r.acc_a_trace.clone(),
                })
                .collect(),
            position_table: study.position_table(),
            column_mean,
            column_std,
            forgetting: fr.per_task,
            prior_difficulty: correlation.map(|c| c.prior.clone()),
            pcc: correlation.and_then(|c| c.pcc),
            warnings,
            config,
            seeds,
        })
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&serde_json::to_value(self)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fmt_float(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        "0.000000".into()
    } else {
        s
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                match n.as_f64() {
                    Some(x) if x.is_finite() => out.push_str(&fmt_float(x)),
                    _ => out.push_str("null"),
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, i) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, i, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, i) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, i, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with sorted keys and every float printed with six decimals.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn task_header(first: &str, k: usize, last: Option<&str>) -> String {
    let mut h = first.to_string();
    for j in 0..k {
        write!(h, ",T{j}").unwrap();
    }
    if let Some(l) = last {
        write!(h, ",{l}").unwrap();
    }
    h.push('\n');
    h
}

/// Position rows, task columns, then `mu` and `sigma` footer rows.
pub fn position_grid_csv(report: &MetricsReport) -> String {
    let k = report.num_tasks;
    let mut out = task_header("position", k, None);
    for (i, row) in report.position_table.iter().enumerate() {
        out.push_str(&(i + 1).to_string());
        for v in row {
            write!(out, ",{}", cell(*v)).unwrap();
        }
        out.push('\n');
    }
    for (label, vals) in [("mu", &report.column_mean), ("sigma", &report.column_std)] {
        out.push_str(label);
        for v in vals {
            write!(out, ",{}", cell(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// One row per report: strategy, Acc_w, its EB, Acc_a, its EB.
pub fn accuracy_table_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("strategy,acc_w,acc_w_eb,acc_a,acc_a_eb\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy,
            fmt_float(r.acc_w.mean),
            cell(r.acc_w.eb),
            fmt_float(r.acc_a.mean),
            cell(r.acc_a.eb)
        )
        .unwrap();
    }
    out
}

/// Prior difficulty row, then one forgetting-rate row per report with its
/// PCC in the last column.
pub fn difficulty_table_csv(reports: &[MetricsReport]) -> Result<String> {
    let first = reports.first().ok_or_else(|| Error::Argument("no reports to tabulate".into()))?;
    let k = first.num_tasks;
    let mut out = task_header("row", k, Some("pcc"));
    if let Some(prior) = reports.iter().find_map(|r| r.prior_difficulty.as_ref()) {
        out.push_str("D_prior");
        for v in prior {
            write!(out, ",{}", fmt_float(*v)).unwrap();
        }
        out.push_str(",\n");
    }
    for r in reports {
        write!(out, "D_post_{}", r.strategy).unwrap();
        for v in &r.forgetting {
            write!(out, ",{}", cell(*v)).unwrap();
        }
        writeln!(out, ",{}", cell(r.pcc)).unwrap();
    }
    Ok(out)
}
