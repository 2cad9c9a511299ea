use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Aggregate, HarnessError, ReportRow};
use crate::impute::ImputerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::Config(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<(), HarnessError> {
    std::fs::write(path, rows_csv(rows)?)?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn rows_csv(rows: &[ReportRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "dataset",
            "method",
            "imputer",
            "m",
            "seed",
            "vrc",
            "vcx",
            "cost_mean",
            "cost_std",
            "lof_mean",
            "lof_std",
            "n_infeasible",
            "n_not_converged",
            "runtime_ms",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn pm(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "n/a".into(),
    }
}

/// One line per (method, dataset, imputer, m); repetitions are averaged.
fn markdown(rows: &[ReportRow]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    let mut keys: Vec<(crate::explainers::Method, usize, usize, usize)> = rows
        .iter()
        .map(|r| {
            let d = datasets.iter().position(|d| *d == r.dataset).expect("collected");
            let i = ImputerKind::ALL.iter().position(|&k| k == r.imputer).expect("known kind");
            (r.method, d, i, r.m)
        })
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = String::from("| Method | Dataset | Imputer | m | VRC | VCX | Cost | LOF |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for (method, d, i, m) in keys {
        let cell: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.method == method && r.dataset == datasets[d] && r.imputer == ImputerKind::ALL[i] && r.m == m)
            .collect();
        let avg = |f: fn(&ReportRow) -> Option<f64>| mean_of(cell.iter().map(|r| f(r)));
        let vrc = avg(|r| Some(r.vrc)).unwrap_or(f64::NAN);
        let vcx = avg(|r| Some(r.vcx)).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "| {method} | {} | {} | {m} | {vrc:.2} | {vcx:.2} | {} | {} |",
            datasets[d],
            ImputerKind::ALL[i],
            pm(avg(|r| r.cost_mean), avg(|r| r.cost_std)),
            pm(avg(|r| r.lof_mean), avg(|r| r.lof_std)),
        );
    }
    out
}

pub fn render(rows: &[ReportRow], format: ReportFormat) -> Result<String, HarnessError> {
    match format {
        ReportFormat::Markdown => Ok(markdown(rows)),
        ReportFormat::Csv => rows_csv(rows),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
    }
}

pub fn render_aggregate(agg: &Aggregate, format: ReportFormat) -> Result<String, HarnessError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(agg)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for g in &agg.groups {
                w.serialize(g)?;
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut out = String::from("| m | Group | n | Median VRC | Q1 | Q3 |\n|---|---|---|---|---|---|\n");
            for g in &agg.groups {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.3} | {:.3} | {:.3} |",
                    g.m, g.group, g.n, g.median, g.q1, g.q3
                );
            }
            out.push_str("\n| m | A | B | U | p |\n|---|---|---|---|---|\n");
            for c in &agg.comparisons {
                let _ = writeln!(out, "| {} | {} | {} | {} | {:.6} |", c.m, c.a, c.b, c.u, c.p);
            }
            Ok(out)
        }
    }
}
