use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{score_row, HarnessError, ImputedBatch, Prepared, SweepAxis, SweepConfig};
use crate::explainers::{wachter, Method};
use crate::impute::Imputer;
use crate::solver::InputBox;

/// VRC of one (x, λ) grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub x: f64,
    pub lambda: f64,
    pub vrc: f64,
    pub vcx: f64,
    pub n_not_converged: usize,
}

/// Runs Wachter over the `grid_y × grid_x` lattice on one masked, imputed
/// batch. The pipeline matches a bench repetition with master seed
/// `cfg.seed`, so a 1×1 grid reproduces the corresponding bench cell.
pub fn sweep_wachter(cfg: &SweepConfig, base: &Path) -> Result<Vec<SweepCell>, HarnessError> {
    cfg.validate()?;
    let dc = cfg.dataset.as_ref().expect("validated");
    let ds = dc.load(base)?.dataset;
    if cfg.m > ds.n_features() {
        return Err(HarnessError::Config(format!("m = {} exceeds {} features", cfg.m, ds.n_features())));
    }
    let prep = Prepared::new(&dc.name, &ds, &cfg.model, cfg.n_batch, cfg.seed)?;
    let imputer = Imputer::fit(cfg.imputer, &prep.split.train, cfg.imputer_params)?;
    let batch = ImputedBatch::new(prep.mask(cfg.m)?, cfg.m, &imputer)?;
    let unit = InputBox::unit(ds.n_features());
    let points: Vec<(f64, f64)> =
        cfg.grid_y.iter().flat_map(|&y| cfg.grid_x.iter().map(move |&x| (x, y))).collect();
    points
        .par_iter()
        .map(|&(x, lambda)| {
            let params = cfg.axis_x.apply(cfg.fixed, x, lambda);
            let explanations = batch
                .x_hat
                .iter()
                .zip(&prep.targets)
                .map(|(xh, &t)| wachter(&prep.clf, xh, t, &params, &unit))
                .collect::<Result<Vec<_>, _>>()?;
            let row = score_row(&prep, &batch, Method::Wachter, &explanations, false)?;
            Ok(SweepCell { x, lambda, vrc: row.vrc, vcx: row.vcx, n_not_converged: row.n_not_converged })
        })
        .collect()
}

/// Plot-ready CSV with columns `<axis>,lambda,vrc,vcx,n_not_converged`.
pub fn write_sweep(path: &Path, axis: SweepAxis, cells: &[SweepCell]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([axis.name(), "lambda", "vrc", "vcx", "n_not_converged"])?;
    for c in cells {
        w.write_record([
            c.x.to_string(),
            c.lambda.to_string(),
            c.vrc.to_string(),
            c.vcx.to_string(),
            c.n_not_converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
