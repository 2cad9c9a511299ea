use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ReportRow};
use crate::metrics::{mann_whitney_u, quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Robust,
    Imputer,
    Dataset,
}

impl FromStr for GroupBy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "robust" => Ok(GroupBy::Robust),
            "imputer" => Ok(GroupBy::Imputer),
            "dataset" => Ok(GroupBy::Dataset),
            other => Err(HarnessError::Config(format!("unknown grouping `{other}`"))),
        }
    }
}

impl GroupBy {
    fn key(self, row: &ReportRow) -> String {
        match self {
            GroupBy::Robust if row.method.is_robust() => "robust".into(),
            GroupBy::Robust => "non-robust".into(),
            GroupBy::Imputer => row.imputer.to_string(),
            GroupBy::Dataset => row.dataset.clone(),
        }
    }
}

/// Distribution of cell-level VRC values in one group at one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub m: usize,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub m: usize,
    pub a: String,
    pub b: String,
    pub u: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub by: GroupBy,
    pub groups: Vec<GroupSummary>,
    pub comparisons: Vec<Comparison>,
}

pub fn group_summary(group: &str, m: usize, values: &[f64]) -> GroupSummary {
    GroupSummary {
        group: group.to_string(),
        m,
        n: values.len(),
        median: quantile(values, 0.5),
        q1: quantile(values, 0.25),
        q3: quantile(values, 0.75),
    }
}

/// Medians and quartiles of VRC per group and `m`, with a two-sided
/// Mann–Whitney test for every pair of groups at each `m`. Robust groups are
/// {mcer, rnce, proplace, stce, apas} against all other methods.
pub fn aggregate(rows: &[ReportRow], by: GroupBy) -> Result<Aggregate, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("nothing to aggregate".into()));
    }
    let ms: BTreeSet<usize> = rows.iter().map(|r| r.m).collect();
    let mut groups = Vec::new();
    let mut comparisons = Vec::new();
    for m in ms {
        let at_m: Vec<&ReportRow> = rows.iter().filter(|r| r.m == m).collect();
        let mut keys: Vec<String> = Vec::new();
        for r in &at_m {
            let k = by.key(r);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        if by == GroupBy::Robust {
            keys.sort_by_key(|k| k != "robust");
        }
        let values: Vec<Vec<f64>> = keys
            .iter()
            .map(|k| at_m.iter().filter(|r| &by.key(r) == k).map(|r| r.vrc).collect())
            .collect();
        for (k, v) in keys.iter().zip(&values) {
            groups.push(group_summary(k, m, v));
        }
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                let t = mann_whitney_u(&values[i], &values[j])?;
                comparisons.push(Comparison {
                    m,
                    a: keys[i].clone(),
                    b: keys[j].clone(),
                    u: t.u,
                    p: t.p_two_sided,
                });
            }
        }
    }
    Ok(Aggregate { by, groups, comparisons })
}
