//! Mean, k-nearest-neighbour and chained-equations (MICE-style) imputation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, IncompleteInstance};

#[derive(Debug, Error, PartialEq)]
pub enum ImputeError {
    #[error("cannot fit an imputer on an empty training set")]
    EmptyTrain,
    #[error("k = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("multiple imputation requires a MICE imputer")]
    NotMice,
    #[error("need at least one imputation draw")]
    NoDraws,
    #[error("unknown imputer `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputerKind {
    Simple,
    Knn,
    Mice,
}

impl ImputerKind {
    pub const ALL: [ImputerKind; 3] = [ImputerKind::Simple, ImputerKind::Knn, ImputerKind::Mice];

    pub fn name(self) -> &'static str {
        match self {
            ImputerKind::Simple => "simple",
            ImputerKind::Knn => "knn",
            ImputerKind::Mice => "mice",
        }
    }
}

impl fmt::Display for ImputerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ImputerKind {
    type Err = ImputeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simple" | "mean" => Ok(ImputerKind::Simple),
            "knn" => Ok(ImputerKind::Knn),
            "mice" => Ok(ImputerKind::Mice),
            _ => Err(ImputeError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputerParams {
    /// Neighbours averaged by the kNN imputer.
    pub k: usize,
    /// Maximum chained-equation sweeps.
    pub max_iter: usize,
    /// Sweeps stop once the largest change falls below this.
    pub tol: f64,
}

impl Default for ImputerParams {
    fn default() -> Self {
        ImputerParams { k: 5, max_iter: 10, tol: 1e-6 }
    }
}

/// Intercept plus one slope per feature; the slope on the target feature
/// itself is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressor {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearRegressor {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum State {
    Simple,
    Knn { k: usize },
    Mice { regressors: Vec<LinearRegressor>, max_iter: usize, tol: f64 },
}

/// Fitted imputer. Cheap to clone; the training matrix is shared.
#[derive(Debug, Clone)]
pub struct Imputer {
    kind: ImputerKind,
    means: Vec<f64>,
    train: Arc<Vec<Vec<f64>>>,
    state: State,
}

/// Detailed imputation result.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub values: Vec<f64>,
    /// kNN had no observed coordinate to measure distance on and used means.
    pub fell_back_to_mean: bool,
    /// Largest coordinate change of each chained-equation sweep (MICE only).
    pub max_changes: Vec<f64>,
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows[0].len();
    let mut m = vec![0.0; n];
    for r in rows {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= rows.len() as f64);
    m
}

/// Least-squares fit of column `target` on every other column, with
/// intercept. Rank-deficient designs get the minimum-norm solution.
pub fn fit_ols(rows: &[Vec<f64>], target: usize) -> LinearRegressor {
    let n = rows[0].len();
    let others: Vec<usize> = (0..n).filter(|&j| j != target).collect();
    let means = column_means(rows);
    // centring keeps the intercept out of the SVD and improves conditioning
    let x = DMatrix::from_fn(rows.len(), others.len(), |i, c| rows[i][others[c]] - means[others[c]]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][target] - means[target]);
    let beta = if others.is_empty() {
        DVector::zeros(0)
    } else {
        let svd = x.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        svd.solve(&y, eps).unwrap_or_else(|_| DVector::zeros(others.len()))
    };
    let mut coef = vec![0.0; n];
    for (c, &j) in others.iter().enumerate() {
        coef[j] = beta[c];
    }
    let intercept = means[target] - others.iter().map(|&j| coef[j] * means[j]).sum::<f64>();
    LinearRegressor { intercept, coef }
}

impl Imputer {
    pub fn fit(kind: ImputerKind, train: &Dataset, params: ImputerParams) -> Result<Self, ImputeError> {
        Self::fit_rows(kind, Arc::new(train.features.clone()), params)
    }

    fn fit_rows(
        kind: ImputerKind,
        train: Arc<Vec<Vec<f64>>>,
        params: ImputerParams,
    ) -> Result<Self, ImputeError> {
        if train.is_empty() {
            return Err(ImputeError::EmptyTrain);
        }
        let means = column_means(&train);
        let state = match kind {
            ImputerKind::Simple => State::Simple,
            ImputerKind::Knn => {
                if params.k == 0 || params.k > train.len() {
                    return Err(ImputeError::KTooLarge { k: params.k, rows: train.len() });
                }
                State::Knn { k: params.k }
            }
            ImputerKind::Mice => State::Mice {
                regressors: (0..means.len()).map(|j| fit_ols(&train, j)).collect(),
                max_iter: params.max_iter,
                tol: params.tol,
            },
        };
        Ok(Imputer { kind, means, train, state })
    }

    pub fn kind(&self) -> ImputerKind {
        self.kind
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Per-feature chained-equation regressors (MICE only).
    pub fn regressors(&self) -> Option<&[LinearRegressor]> {
        match &self.state {
            State::Mice { regressors, .. } => Some(regressors),
            _ => None,
        }
    }

    pub fn impute(&self, x: &IncompleteInstance) -> Result<Vec<f64>, ImputeError> {
        self.impute_detailed(x).map(|imp| imp.values)
    }

    pub fn impute_detailed(&self, x: &IncompleteInstance) -> Result<Imputation, ImputeError> {
        if x.len() != self.means.len() {
            return Err(ImputeError::DimensionMismatch { expected: self.means.len(), got: x.len() });
        }
        let mut values: Vec<f64> =
            x.0.iter().zip(&self.means).map(|(v, m)| v.unwrap_or(*m)).collect();
        let mut out = Imputation { values: Vec::new(), fell_back_to_mean: false, max_changes: Vec::new() };
        let missing: Vec<usize> = x.missing().collect();
        if missing.is_empty() {
            out.values = values;
            return Ok(out);
        }
        match &self.state {
            State::Simple => {}
            State::Knn { k } => {
                if missing.len() == x.len() {
                    out.fell_back_to_mean = true;
                } else {
                    let nearest = self.nearest_rows(x, *k);
                    for &j in &missing {
                        values[j] = nearest.iter().map(|&r| self.train[r][j]).sum::<f64>() / *k as f64;
                    }
                }
            }
            State::Mice { regressors, max_iter, tol } => {
                for _ in 0..*max_iter {
                    let mut max_change: f64 = 0.0;
                    for &j in &missing {
                        let v = regressors[j].predict(&values).clamp(0.0, 1.0);
                        max_change = max_change.max((v - values[j]).abs());
                        values[j] = v;
                    }
                    out.max_changes.push(max_change);
                    if max_change < *tol {
                        break;
                    }
                }
            }
        }
        out.values = values;
        Ok(out)
    }

    /// Indices of the `k` training rows closest to `x` in Euclidean distance
    /// over the observed coordinates; ties keep the lower row index.
    fn nearest_rows(&self, x: &IncompleteInstance, k: usize) -> Vec<usize> {
        let observed: Vec<(usize, f64)> =
            x.0.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
        let mut dist: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(r, row)| (observed.iter().map(|&(i, v)| (row[i] - v).powi(2)).sum::<f64>(), r))
            .collect();
        let k = k.min(dist.len());
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut head: Vec<(f64, usize)> = dist[..k].to_vec();
        head.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        head.into_iter().map(|(_, r)| r).collect()
    }

    /// `draws` completions of `x`: draw 0 is the plain MICE completion, draw
    /// `j > 0` refits the chained equations on a bootstrap resample of the
    /// training rows seeded by `seed + j`.
    pub fn impute_multi(
        &self,
        x: &IncompleteInstance,
        draws: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, ImputeError> {
        let State::Mice { max_iter, tol, .. } = &self.state else {
            return Err(ImputeError::NotMice);
        };
        if draws == 0 {
            return Err(ImputeError::NoDraws);
        }
        let first = self.impute(x)?;
        if x.is_complete() {
            return Ok(vec![first; draws]);
        }
        let params = ImputerParams { max_iter: *max_iter, tol: *tol, ..ImputerParams::default() };
        let mut out = vec![first];
        for j in 1..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            let rows = self.train.len();
            let sample: Vec<Vec<f64>> =
                (0..rows).map(|_| self.train[rng.random_range(0..rows)].clone()).collect();
            let refit = Imputer::fit_rows(ImputerKind::Mice, Arc::new(sample), params)?;
            out.push(refit.impute(x)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, NormParam};
    use proptest::prelude::*;
    use rand::Rng;

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let n = rows[0].len();
        let labels = (0..rows.len()).map(|i| (i % 2) as u8).collect();
        Dataset::new(
            rows,
            labels,
            (0..n).map(|j| format!("x{j}")).collect(),
            vec![NormParam { min: 0.0, max: 1.0 }; n],
        )
        .unwrap()
    }

    fn collinear() -> Dataset {
        dataset((0..=10).map(|i| {
            let x = 0.05 * i as f64;
            vec![x, 2.0 * x]
        }).collect())
    }

    fn inc(v: &[Option<f64>]) -> IncompleteInstance {
        IncompleteInstance(v.to_vec())
    }

    #[test]
    fn simple_uses_training_means() {
        let imp = Imputer::fit(ImputerKind::Simple, &dataset(vec![vec![0.0, 0.0], vec![1.0, 1.0]]), ImputerParams::default()).unwrap();
        assert_eq!(imp.means(), &[0.5, 0.5]);

        let imp = Imputer::fit(ImputerKind::Simple, &dataset(vec![vec![0.2, 0.4], vec![0.6, 0.8]]), ImputerParams::default()).unwrap();
        let out = imp.impute(&inc(&[None, Some(0.3)])).unwrap();
        assert!((out[0] - 0.4).abs() < 1e-15);
        assert_eq!(out[1], 0.3);
    }

    #[test]
    fn knn_k_precondition() {
        let ds = dataset(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!(Imputer::fit(ImputerKind::Knn, &ds, ImputerParams { k: 1, ..Default::default() }).is_ok());
        assert_eq!(
            Imputer::fit(ImputerKind::Knn, &ds, ImputerParams { k: 3, ..Default::default() }).unwrap_err(),
            ImputeError::KTooLarge { k: 3, rows: 2 }
        );
    }

    #[test]
    fn knn_uses_nearest_observed_row() {
        let ds = dataset(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let imp = Imputer::fit(ImputerKind::Knn, &ds, ImputerParams { k: 1, ..Default::default() }).unwrap();
        assert_eq!(imp.impute(&inc(&[Some(0.9), None])).unwrap(), vec![0.9, 1.0]);
    }

    #[test]
    fn knn_falls_back_to_means_when_nothing_observed() {
        let ds = dataset(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let imp = Imputer::fit(ImputerKind::Knn, &ds, ImputerParams { k: 1, ..Default::default() }).unwrap();
        let out = imp.impute_detailed(&inc(&[None, None])).unwrap();
        assert!(out.fell_back_to_mean);
        assert_eq!(out.values, vec![0.5, 0.5]);
    }

    #[test]
    fn mice_learns_exact_slope() {
        let imp = Imputer::fit(ImputerKind::Mice, &collinear(), ImputerParams::default()).unwrap();
        let reg = &imp.regressors().unwrap()[1];
        assert!((reg.coef[0] - 2.0).abs() < 1e-9, "slope {}", reg.coef[0]);
        assert_eq!(reg.coef[1], 0.0);
        let out = imp.impute(&inc(&[Some(0.4), None])).unwrap();
        assert_eq!(out[0], 0.4);
        assert!((out[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn mice_max_change_settles() {
        let ds = synth_blobs(200, 4, 3.0, 2).unwrap();
        let imp = Imputer::fit(ImputerKind::Mice, &ds, ImputerParams { tol: 0.0, ..Default::default() }).unwrap();
        let out = imp.impute_detailed(&inc(&[Some(0.3), None, None, Some(0.6)])).unwrap();
        let tail = &out.max_changes[out.max_changes.len() - 3..];
        assert!(tail[0] >= tail[1] && tail[1] >= tail[2], "{:?}", out.max_changes);
    }

    #[test]
    fn complete_input_is_identity_for_all_kinds() {
        let ds = synth_blobs(30, 3, 2.0, 4).unwrap();
        let x = [0.1, 0.7, 0.3];
        for kind in ImputerKind::ALL {
            let imp = Imputer::fit(kind, &ds, ImputerParams::default()).unwrap();
            assert_eq!(imp.impute(&IncompleteInstance::complete(&x)).unwrap(), x.to_vec());
        }
    }

    #[test]
    fn multi_imputation_contract() {
        let imp = Imputer::fit(ImputerKind::Mice, &collinear(), ImputerParams::default()).unwrap();
        let x = inc(&[Some(0.4), None]);
        assert_eq!(imp.impute_multi(&x, 1, 7).unwrap(), vec![imp.impute(&x).unwrap()]);

        let draws = imp.impute_multi(&x, 5, 7).unwrap();
        assert_eq!(draws.len(), 5);
        for d in &draws {
            assert_eq!(d[0], 0.4);
            assert!((d[1] - 0.8).abs() <= 0.05);
        }

        let full = IncompleteInstance::complete(&[0.1, 0.2]);
        assert_eq!(imp.impute_multi(&full, 3, 0).unwrap(), vec![vec![0.1, 0.2]; 3]);

        let simple = Imputer::fit(ImputerKind::Simple, &collinear(), ImputerParams::default()).unwrap();
        assert_eq!(simple.impute_multi(&x, 2, 0).unwrap_err(), ImputeError::NotMice);
        assert_eq!(imp.impute_multi(&x, 0, 0).unwrap_err(), ImputeError::NoDraws);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let ds = synth_blobs(10, 2, 2.0, 0).unwrap().subset(&[]);
        assert_eq!(Imputer::fit(ImputerKind::Simple, &ds, ImputerParams::default()).unwrap_err(), ImputeError::EmptyTrain);
    }

    /// Brute-force kNN: full sort of every training row by observed distance.
    fn knn_oracle(train: &[Vec<f64>], x: &[Option<f64>], k: usize) -> Vec<f64> {
        let mut d: Vec<(f64, usize)> = train
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let s: f64 = x.iter().zip(row).filter_map(|(o, v)| o.map(|o| (o - v) * (o - v))).sum();
                (s.sqrt(), r)
            })
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        x.iter()
            .enumerate()
            .map(|(j, o)| o.unwrap_or_else(|| d[..k].iter().map(|&(_, r)| train[r][j]).sum::<f64>() / k as f64))
            .collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let ds = synth_blobs(60, 4, 2.0, 12).unwrap();
        let imp = Imputer::fit(ImputerKind::Knn, &ds, ImputerParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: Vec<Option<f64>> = (0..4)
                .map(|_| if rng.random_bool(0.4) { None } else { Some(rng.random_range(0.0..1.0)) })
                .collect();
            if x.iter().all(Option::is_none) {
                continue;
            }
            let got = imp.impute(&IncompleteInstance(x.clone())).unwrap();
            let want = knn_oracle(&ds.features, &x, 5);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn observed_coordinates_are_preserved(mask in prop::collection::vec(any::<bool>(), 3), seed: u64) {
            let ds = synth_blobs(40, 3, 2.0, seed % 7).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Option<f64>> = mask
                .iter()
                .map(|&m| if m { None } else { Some(rng.random_range(0.0..1.0)) })
                .collect();
            for kind in ImputerKind::ALL {
                let imp = Imputer::fit(kind, &ds, ImputerParams::default()).unwrap();
                let out = imp.impute(&IncompleteInstance(x.clone())).unwrap();
                for (o, v) in x.iter().zip(&out) {
                    if let Some(o) = o {
                        prop_assert_eq!(o, v);
                    }
                }
            }
        }
    }
}
