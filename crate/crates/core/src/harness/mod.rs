//! Experiment orchestration: configuration, the benchmark grid, the Wachter
//! sweep, aggregation with rank tests, and report rendering.

mod aggregate;
mod bench;
mod config;
mod report;
mod sweep;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate, group_summary, Aggregate, Comparison, GroupBy, GroupSummary};
pub use bench::{run_bench, run_bench_in, write_outputs, BenchOutput, DatasetInfo, Manifest};
pub use config::{
    config_base, BenchConfig, DatasetConfig, DatasetSource, Loaded, SeedConfig, SweepAxis, SweepConfig,
};
pub use report::{read_rows, render, render_aggregate, write_rows, ReportFormat};
pub use sweep::{sweep_wachter, write_sweep, SweepCell};

use crate::data::{mask_mcar, DataError, Dataset, IncompleteInstance, MaskSpec, Split};
use crate::explainers::{ExplainContext, ExplainError, Explanation, Method, MethodParams};
use crate::impute::{ImputeError, Imputer, ImputerKind, ImputerParams};
use crate::metrics::{score_batch, Lof, MetricError};
use crate::model::{train, Class, Classifier, ModelError, TrainConfig};
use crate::robustness::retrain_ensemble;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for unusable data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) | HarnessError::Model(_) | HarnessError::Impute(_) | HarnessError::Csv(_) => 3,
            _ => 1,
        }
    }
}

/// One (dataset, method, imputer, m, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    pub imputer: ImputerKind,
    pub m: usize,
    pub seed: u64,
    pub vrc: f64,
    pub vcx: f64,
    /// Empty when no instance produced a point.
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    pub lof_mean: Option<f64>,
    pub lof_std: Option<f64>,
    pub n_infeasible: usize,
    pub n_not_converged: usize,
    pub runtime_ms: u64,
}

const TAG_BATCH: u64 = 1;
const TAG_MASK: u64 = 2;
const TAG_DRAWS: u64 = 3;
const TAG_APAS: u64 = 4;
const TAG_ENSEMBLE: u64 = 5;

/// Mixes `parts` into `seed` with the splitmix64 finalizer.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed;
    for &p in parts {
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Everything fixed for one (dataset, repetition): split, classifier, LOF
/// reference and the evaluation batch with its targets.
pub struct Prepared {
    pub dataset: String,
    pub seed: u64,
    pub split: Split,
    pub clf: Classifier,
    pub lof: Lof,
    pub batch: Vec<Vec<f64>>,
    pub targets: Vec<Class>,
}

impl Prepared {
    /// Splits with `seed`, trains with `seed`, and samples `n_batch` test
    /// rows (with replacement only when the test split is smaller).
    pub fn new(
        name: &str,
        ds: &Dataset,
        model: &TrainConfig,
        n_batch: usize,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let split = crate::data::split(ds, seed)?;
        let clf = train(&split.train, &TrainConfig { seed, ..*model })?;
        let lof = Lof::with_default_k(&split.train.features)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_BATCH]));
        let n_test = split.test.n_rows();
        let idx: Vec<usize> = if n_test >= n_batch {
            sample(&mut rng, n_test, n_batch).into_vec()
        } else {
            (0..n_batch).map(|_| rng.random_range(0..n_test)).collect()
        };
        let batch: Vec<Vec<f64>> = idx.iter().map(|&i| split.test.features[i].clone()).collect();
        let targets = batch.iter().map(|x| clf.class_of(x).opposite()).collect();
        Ok(Prepared { dataset: name.to_string(), seed, split, clf, lof, batch, targets })
    }

    /// The batch with `m` coordinates masked per row. Masks depend only on
    /// the seed, `m` and the row, so every imputer sees the same ones.
    pub fn mask(&self, m: usize) -> Result<Vec<IncompleteInstance>, HarnessError> {
        self.batch
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let seed = derive_seed(self.seed, &[TAG_MASK, m as u64, i as u64]);
                Ok(mask_mcar(x, MaskSpec { m, seed })?)
            })
            .collect()
    }

    pub fn explain_context(
        &self,
        params: MethodParams,
        ensemble_model: &TrainConfig,
    ) -> Result<ExplainContext<'_>, HarnessError> {
        let ctx = ExplainContext::new(
            &self.clf,
            &self.split.train.features,
            params,
            derive_seed(self.seed, &[TAG_APAS]),
        )?;
        if params.stce.filter == crate::explainers::StceFilter::Ensemble {
            let cfg = TrainConfig { seed: self.seed, ..*ensemble_model };
            let set = retrain_ensemble(
                &self.split.train,
                &cfg,
                params.stce.ensemble_size,
                derive_seed(self.seed, &[TAG_ENSEMBLE]),
                true,
            )?;
            return Ok(ctx.with_ensemble(set));
        }
        Ok(ctx)
    }
}

/// A masked batch completed by one imputer.
pub struct ImputedBatch {
    pub m: usize,
    pub imputer: ImputerKind,
    pub masked: Vec<IncompleteInstance>,
    pub x_hat: Vec<Vec<f64>>,
}

impl ImputedBatch {
    pub fn new(masked: Vec<IncompleteInstance>, m: usize, imputer: &Imputer) -> Result<Self, HarnessError> {
        let x_hat = masked.iter().map(|x| imputer.impute(x)).collect::<Result<_, _>>()?;
        Ok(ImputedBatch { m, imputer: imputer.kind(), masked, x_hat })
    }
}

/// Completions handed to ARMIN for row `i`: the cell's own completion first,
/// then bootstrap MICE draws.
fn armin_completions(
    prep: &Prepared,
    batch: &ImputedBatch,
    mice: &Imputer,
    i: usize,
    draws: usize,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let seed = derive_seed(prep.seed, &[TAG_DRAWS, batch.m as u64, i as u64]);
    let mut completions = mice.impute_multi(&batch.masked[i], draws, seed)?;
    completions[0] = batch.x_hat[i].clone();
    Ok(completions)
}

/// Runs `method` over the whole batch and scores it against the true rows.
/// Explanations for every instance of `batch`, in batch order. ARMIN draws
/// its completions from `mice`.
pub fn explain_cell(
    prep: &Prepared,
    ctx: &ExplainContext<'_>,
    batch: &ImputedBatch,
    method: Method,
    mice: Option<&Imputer>,
) -> Result<Vec<Explanation>, HarnessError> {
    (0..prep.batch.len())
        .map(|i| {
            let completions = match (method, mice) {
                (Method::Armin, Some(mice)) => {
                    Some(armin_completions(prep, batch, mice, i, ctx.params().armin_draws)?)
                }
                _ => None,
            };
            let seed = prep.seed ^ i as u64;
            Ok(ctx.explain(method, &batch.x_hat[i], prep.targets[i], seed, completions.as_deref())?)
        })
        .collect()
}

pub fn run_cell(
    prep: &Prepared,
    ctx: &ExplainContext<'_>,
    batch: &ImputedBatch,
    method: Method,
    mice: Option<&Imputer>,
    record_timings: bool,
) -> Result<ReportRow, HarnessError> {
    let explanations = explain_cell(prep, ctx, batch, method, mice)?;
    score_row(prep, batch, method, &explanations, record_timings)
}

pub fn score_row(
    prep: &Prepared,
    batch: &ImputedBatch,
    method: Method,
    explanations: &[Explanation],
    record_timings: bool,
) -> Result<ReportRow, HarnessError> {
    let s = score_batch(&prep.clf, &prep.lof, &prep.batch, explanations, &prep.targets)?;
    let runtime_ms = if record_timings {
        explanations.iter().map(|e| e.solve_time).sum::<std::time::Duration>().as_millis() as u64
    } else {
        0
    };
    Ok(ReportRow {
        dataset: prep.dataset.clone(),
        method,
        imputer: batch.imputer,
        m: batch.m,
        seed: prep.seed,
        vrc: s.vrc,
        vcx: s.vcx,
        cost_mean: finite(s.cost_mean),
        cost_std: finite(s.cost_std),
        lof_mean: finite(s.lof_mean),
        lof_std: finite(s.lof_std),
        n_infeasible: s.n_infeasible,
        n_not_converged: s.n_not_converged,
        runtime_ms,
    })
}

/// Fits every imputer kind in `kinds` on the training split, plus MICE when
/// ARMIN needs it.
pub fn fit_imputers(
    train: &Dataset,
    kinds: &[ImputerKind],
    params: ImputerParams,
    need_mice: bool,
) -> Result<Vec<Imputer>, HarnessError> {
    let mut all: Vec<ImputerKind> = kinds.to_vec();
    if need_mice && !all.contains(&ImputerKind::Mice) {
        all.push(ImputerKind::Mice);
    }
    all.iter().map(|&k| Ok(Imputer::fit(k, train, params)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_part() {
        let a = derive_seed(1, &[TAG_MASK, 1, 0]);
        assert_ne!(a, derive_seed(1, &[TAG_MASK, 1, 1]));
        assert_ne!(a, derive_seed(2, &[TAG_MASK, 1, 0]));
        assert_eq!(a, derive_seed(1, &[TAG_MASK, 1, 0]));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
        assert_eq!(HarnessError::Data(DataError::MissingColumn("y".into())).exit_code(), 3);
    }
}
