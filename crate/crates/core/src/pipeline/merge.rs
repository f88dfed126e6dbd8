use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::rundir::RunDirectory;
use crate::datasets::io::{read_text, write_text};
use crate::error::{Error, Result};
use crate::eval::{accuracy_table_csv, difficulty_table_csv, position_grid_csv, MetricsReport};

/// Config keys allowed to differ between merged runs.
pub const MERGE_IGNORED_KEYS: [&str; 1] = ["train.strategy"];

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

/// Dotted config keys whose values differ between `a` and `b`.
pub fn mismatched_keys(a: &Value, b: &Value) -> Vec<String> {
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", a, &mut fa);
    flatten("", b, &mut fb);
    let mut keys: Vec<String> = fa.keys().chain(fb.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| !MERGE_IGNORED_KEYS.contains(&k.as_str()) && fa.get(k) != fb.get(k))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTables {
    /// Strategy rows with Acc_w, Acc_a and their error bounds.
    pub accuracy: String,
    /// One position grid per report, keyed by file name.
    pub grids: Vec<(String, String)>,
    /// Prior difficulty and per-strategy forgetting rates with PCC.
    pub difficulty: String,
}

impl ComparisonTables {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![(dir.join("table1.csv"), &self.accuracy), (dir.join("table5.csv"), &self.difficulty)];
        for (name, csv) in &self.grids {
            files.push((dir.join(name), csv));
        }
        for (p, text) in &files {
            write_text(p, text)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// Merges reports of runs that differ only in strategy.
pub fn merge_reports(reports: &[MetricsReport]) -> Result<ComparisonTables> {
    let first = reports.first().ok_or_else(|| Error::Argument("no reports to merge".into()))?;
    for r in &reports[1..] {
        let bad = mismatched_keys(&first.config, &r.config);
        if !bad.is_empty() {
            return Err(Error::Config(format!(
                "cannot merge `{}` with `{}`: mismatched keys {}",
                first.strategy,
                r.strategy,
                bad.join(", ")
            )));
        }
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let grids = reports
        .iter()
        .map(|r| {
            let n = seen.entry(r.strategy.as_str()).or_insert(0);
            *n += 1;
            let name = if *n == 1 { format!("grid_{}.csv", r.strategy) } else { format!("grid_{}_{}.csv", r.strategy, n) };
            (name, position_grid_csv(r))
        })
        .collect();
    Ok(ComparisonTables {
        accuracy: accuracy_table_csv(reports),
        grids,
        difficulty: difficulty_table_csv(reports)?,
    })
}

pub fn load_report(run_dir: &Path) -> Result<MetricsReport> {
    let path = RunDirectory::new(run_dir).metrics_path();
    MetricsReport::from_json(&read_text(&path)?)
}
