use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::types::Instance;
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses JSON-lines instances: `{"id": str, "tokens": [str], "relation": str}`.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_jsonl(text: &str) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let schema = |field: &str| Error::Schema {
            line: line_no,
            field: field.to_string(),
        };
        let obj = value.as_object().ok_or_else(|| schema("<object>"))?;
        let id = obj.get("id").and_then(Value::as_str).ok_or_else(|| schema("id"))?;
        let relation = obj
            .get("relation")
            .and_then(Value::as_str)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| schema("relation"))?;
        let tokens = obj
            .get("tokens")
            .and_then(Value::as_array)
            .ok_or_else(|| schema("tokens"))?
            .iter()
            .map(|t| t.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| schema("tokens"))?;
        out.push(Instance {
            id: id.to_string(),
            tokens,
            relation: relation.to_string(),
        });
    }
    Ok(out)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<Instance>> {
    parse_jsonl(&read(path)?)
}

pub fn write_jsonl(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut text = String::new();
    for inst in instances {
        text.push_str(&serde_json::to_string(inst)?);
        text.push('\n');
    }
    write(path, &text)
}

/// Formats one float row so that it parses back to the identical bits.
pub(crate) fn format_floats(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").expect("string write");
    }
    s
}

/// Parses `key<TAB>f1 f2 … fd` lines, requiring a common dimension.
pub fn parse_vector_table(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `key<TAB>values`".into(),
        })?;
        let values = rest
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty or non-finite vector".into(),
            });
        }
        if let Some((_, first)) = out.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("dimension {} differs from {}", values.len(), first.len()),
                });
            }
        }
        out.push((key.to_string(), values));
    }
    Ok(out)
}

pub fn format_vector_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut text = String::new();
    for (key, values) in rows {
        text.push_str(key);
        text.push('\t');
        text.push_str(&format_floats(values));
        text.push('\n');
    }
    text
}

/// Relation-name vectors, `relation<TAB>f1 … fd` per line.
pub fn load_relation_vectors(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    parse_vector_table(&read(path)?)
}

pub fn write_relation_vectors(path: &Path, vectors: &[(String, Vec<f64>)]) -> Result<()> {
    write(
        path,
        &format_vector_table(vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTask {
    pub task_id: usize,
    pub relations: Vec<String>,
}

/// `{"tasks": [{"task_id": int, "relations": [str]}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub tasks: Vec<PartitionTask>,
}

impl PartitionFile {
    pub fn from_groups(groups: &[Vec<String>]) -> Self {
        Self {
            tasks: groups
                .iter()
                .enumerate()
                .map(|(task_id, relations)| PartitionTask {
                    task_id,
                    relations: relations.clone(),
                })
                .collect(),
        }
    }

    pub fn groups(&self) -> Vec<Vec<String>> {
        let mut tasks = self.tasks.clone();
        tasks.sort_by_key(|t| t.task_id);
        tasks.into_iter().map(|t| t.relations).collect()
    }
}

pub fn write_partition(path: &Path, groups: &[Vec<String>]) -> Result<()> {
    let text = serde_json::to_string_pretty(&PartitionFile::from_groups(groups))?;
    write(path, &(text + "\n"))
}

pub fn load_partition(path: &Path) -> Result<Vec<Vec<String>>> {
    let file: PartitionFile = serde_json::from_str(&read(path)?)?;
    Ok(file.groups())
}

/// Writes a labeled square matrix as CSV with a header row and column.
pub fn matrix_csv(labels: &[String], values: &[Vec<f64>]) -> String {
    let mut s = String::from("id");
    for l in labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (l, row) in labels.iter().zip(values) {
        s.push_str(l);
        for v in row {
            write!(s, ",{v:.6}").expect("string write");
        }
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}

pub fn read_text(path: &Path) -> Result<String> {
    read(path)
}

/// Groups instances by relation, preserving first-appearance order.
pub fn group_by_relation(instances: &[Instance]) -> BTreeMap<String, Vec<&Instance>> {
    let mut map: BTreeMap<String, Vec<&Instance>> = BTreeMap::new();
    for inst in instances {
        map.entry(inst.relation.clone()).or_default().push(inst);
    }
    map
}
