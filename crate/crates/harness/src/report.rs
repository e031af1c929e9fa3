//! Model-by-task results table.

use std::collections::BTreeMap;
use std::path::Path;

use cgrl_sim::Task;

use crate::error::{io_err, HarnessError, Result};
use crate::metrics::MetricsReport;
use crate::model::ModelId;

pub const METRICS: [&str; 3] = ["C.R.", "A.R.", "A.V."];
const SEP: &str = " | ";

/// Parsed table: header labels after the model column, and one row per
/// model with `None` for empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

fn task_order(t: Task) -> usize {
    Task::ALL.iter().position(|&x| x == t).unwrap_or(usize::MAX)
}

/// Known model ids first in their canonical order, anything else after by
/// name.
fn model_key(name: &str) -> (usize, String) {
    let idx = ModelId::ALL.iter().position(|m| m.as_str() == name).unwrap_or(usize::MAX);
    (idx, name.to_string())
}

/// Rows are models, column groups are tasks. Reports for the same model and
/// task (several seeds) are averaged.
pub fn export_table(reports: &[MetricsReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(HarnessError::Domain("a table needs at least one report".into()));
    }
    let mut tasks: Vec<Task> = reports.iter().map(|r| r.task).collect();
    tasks.sort_by_key(|&t| task_order(t));
    tasks.dedup();
    let mut cells: BTreeMap<(usize, String), BTreeMap<usize, Vec<&MetricsReport>>> = BTreeMap::new();
    for r in reports {
        cells.entry(model_key(&r.model)).or_default().entry(task_order(r.task)).or_default().push(r);
    }
    let mut header = vec!["model".to_string()];
    for t in &tasks {
        header.extend(METRICS.iter().map(|m| format!("{t} {m}")));
    }
    let mut lines = vec![header.join(SEP)];
    for ((_, model), by_task) in &cells {
        let mut row = vec![model.clone()];
        for t in &tasks {
            match by_task.get(&task_order(*t)) {
                Some(rs) => {
                    let n = rs.len() as f64;
                    let mean = |f: fn(&MetricsReport) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
                    row.push(format!("{:.2}", mean(|r| r.collision_rate)));
                    row.push(format!("{:.2}", mean(|r| r.average_reward)));
                    row.push(format!("{:.2}", mean(|r| r.average_velocity)));
                }
                None => row.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
            }
        }
        lines.push(row.join(SEP));
    }
    Ok(lines.join("\n") + "\n")
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| HarnessError::Format("empty table".into()))?;
    let columns: Vec<String> = header.split('|').skip(1).map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        let mut parts = line.split('|').map(str::trim);
        let model = parts.next().unwrap_or_default().to_string();
        let values = parts
            .map(|c| match c {
                "-" => Ok(None),
                _ => c.parse().map(Some).map_err(|_| HarnessError::Format(format!("bad table cell {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != columns.len() {
            return Err(HarnessError::Format(format!("row {model:?} has {} cells, header has {}", values.len(), columns.len())));
        }
        rows.push((model, values));
    }
    Ok(Table { columns, rows })
}

/// Every `*.report.toml` directly inside `dir`, in file-name order.
pub fn load_reports(dir: &Path) -> Result<Vec<MetricsReport>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".report.toml")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| MetricsReport::from_toml(&std::fs::read_to_string(p).map_err(io_err(p))?))
        .collect()
}
