use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{explain_cell, fit_imputers, score_row, write_rows, BenchConfig, HarnessError, ImputedBatch, Prepared, ReportRow};
use crate::explainers::{Explanation, Method};
use crate::impute::ImputerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub seed: u64,
    pub rows: usize,
    pub features: usize,
    pub dropped_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_accuracy: f64,
}

/// Provenance written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetInfo>,
    pub rows: usize,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub rows: Vec<ReportRow>,
    /// Per-instance explanations behind each row, parallel to `rows`.
    pub explanations: Vec<Vec<Explanation>>,
    pub manifest: Manifest,
}

/// Hash of everything in the configuration that can change results; the
/// output directory is left out.
pub fn config_hash(cfg: &BenchConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.output_dir = Default::default();
    let json = serde_json::to_string(&cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Runs the full grid with relative dataset paths resolved against the
/// working directory.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutput, HarnessError> {
    run_bench_in(cfg, Path::new("."))
}

/// Runs the full grid; relative dataset paths are resolved against `base`.
/// Rows come out ordered by dataset, repetition, m, imputer and method, no
/// matter how cells are scheduled.
pub fn run_bench_in(cfg: &BenchConfig, base: &Path) -> Result<BenchOutput, HarnessError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.seeds.repetitions as u64).map(|r| cfg.seeds.master.wrapping_add(r)).collect();
    let mut rows = Vec::new();
    let mut explanations = Vec::new();
    let mut infos = Vec::new();
    for dc in &cfg.datasets {
        let loaded = dc.load(base)?;
        let ds = &loaded.dataset;
        if let Some(&m) = cfg.m_values.iter().find(|&&m| m > ds.n_features()) {
            return Err(HarnessError::Config(format!(
                "m = {m} exceeds the {} features of `{}`",
                ds.n_features(),
                dc.name
            )));
        }
        for &seed in &seeds {
            let prep = Prepared::new(&dc.name, ds, &cfg.model, cfg.n_batch, seed)?;
            infos.push(DatasetInfo {
                name: dc.name.clone(),
                seed,
                rows: ds.n_rows(),
                features: ds.n_features(),
                dropped_rows: loaded.dropped_rows,
                train_rows: prep.split.train.n_rows(),
                test_rows: prep.split.test.n_rows(),
                test_accuracy: prep.clf.accuracy(&prep.split.test),
            });
            for (row, e) in run_repetition(cfg, &prep)? {
                rows.push(row);
                explanations.push(e);
            }
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        master_seed: cfg.seeds.master,
        seeds,
        datasets: infos,
        rows: rows.len(),
    };
    Ok(BenchOutput { rows, explanations, manifest })
}

type Cell = (ReportRow, Vec<Explanation>);

fn run_repetition(cfg: &BenchConfig, prep: &Prepared) -> Result<Vec<Cell>, HarnessError> {
    let wants_armin = cfg.methods.contains(&Method::Armin);
    let imputers = fit_imputers(&prep.split.train, &cfg.imputers, cfg.imputer_params, wants_armin)?;
    let mice = imputers.iter().find(|i| i.kind() == ImputerKind::Mice);
    let ctx = prep.explain_context(cfg.params, &cfg.model)?;

    let mut batches = Vec::new();
    for &m in &cfg.m_values {
        let masked = prep.mask(m)?;
        for &kind in &cfg.imputers {
            let imputer = imputers.iter().find(|i| i.kind() == kind).expect("fitted above");
            batches.push(ImputedBatch::new(masked.clone(), m, imputer)?);
        }
    }
    let tasks: Vec<(&ImputedBatch, Method)> = batches
        .iter()
        .flat_map(|b| cfg.methods.iter().map(move |&method| (b, method)))
        .filter(|(b, method)| {
            !(*method == Method::Armin && cfg.armin_mice_only && b.imputer != ImputerKind::Mice)
        })
        .collect();
    tasks
        .par_iter()
        .map(|&(batch, method)| {
            let e = explain_cell(prep, &ctx, batch, method, mice)?;
            Ok((score_row(prep, batch, method, &e, cfg.record_timings)?, e))
        })
        .collect()
}

/// Writes `rows.csv` and `manifest.json` into `dir`.
pub fn write_outputs(out: &BenchOutput, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_rows(&dir.join("rows.csv"), &out.rows)?;
    let manifest = serde_json::to_string_pretty(&out.manifest)?;
    std::fs::write(dir.join("manifest.json"), manifest + "\n")?;
    Ok(())
}
