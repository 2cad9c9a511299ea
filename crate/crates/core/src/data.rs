//! Dataset ingestion, min-max normalization, target binarization, train/test
//! splitting, MCAR masking and synthetic fixture generators.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of rows assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read `{path}`: {source}")]
    MissingFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("no usable rows ({dropped} dropped as unparseable)")]
    NoUsableRows { dropped: usize },
    #[error("target column `{0}` is constant; threshold is undefined")]
    ConstantTarget(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("cannot mask {m} of {n} features")]
    MaskTooLarge { m: usize, n: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

/// Per-column min-max parameters in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParam {
    pub min: f64,
    pub max: f64,
}

impl NormParam {
    pub fn fit(values: &[f64]) -> Self {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        NormParam { min, max }
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    /// Constant columns map to 0.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + v * (self.max - self.min)
        }
    }
}

/// Normalized feature matrix with binary labels.
///
/// Rows of `features` form the empirical distribution used by the imputers,
/// the nearest-neighbour explainers and the LOF reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub norm_params: Vec<NormParam>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        norm_params: Vec<NormParam>,
    ) -> Result<Self, DataError> {
        let n = feature_names.len();
        if labels.len() != features.len() {
            return Err(DataError::Inconsistent(format!(
                "{} labels for {} rows",
                labels.len(),
                features.len()
            )));
        }
        if norm_params.len() != n {
            return Err(DataError::Inconsistent(format!(
                "{} norm params for {n} columns",
                norm_params.len()
            )));
        }
        if let Some(p) = norm_params.iter().find(|p| p.min > p.max) {
            return Err(DataError::Inconsistent(format!("min {} > max {}", p.min, p.max)));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != n {
                return Err(DataError::Inconsistent(format!(
                    "row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(DataError::Inconsistent(format!("row {i} leaves [0,1]")));
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(DataError::Inconsistent("labels must be 0 or 1".into()));
        }
        Ok(Dataset { features, labels, feature_names, norm_params })
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            norm_params: self.norm_params.clone(),
        }
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(move |r| r[j])
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Maps a normalized row back to raw units.
    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.norm_params).map(|(&v, p)| p.denormalize(v)).collect()
    }
}

/// Raw numeric table as read from a CSV, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Rows dropped because a cell was empty or unparseable.
    pub dropped: usize,
}

impl RawTable {
    pub fn read_csv(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|source| DataError::MissingFile {
            path: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        let mut dropped = 0;
        for record in reader.records() {
            let record = record?;
            let parsed: Option<Vec<f64>> = if record.len() == header.len() {
                record
                    .iter()
                    .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect()
            } else {
                None
            };
            match parsed {
                Some(row) => rows.push(row),
                None => dropped += 1,
            }
        }
        Ok(RawTable { header, rows, dropped })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|source| DataError::MissingFile {
            path: path.display().to_string(),
            source,
        })?;
        Ok(())
    }

    /// Normalizes every column, binarizes `target` at `threshold` (ties map
    /// to class 1) and keeps the remaining columns as features.
    pub fn into_dataset(self, target: &str, threshold: f64) -> Result<Dataset, DataError> {
        let t = self
            .header
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| DataError::MissingColumn(target.to_string()))?;
        if self.rows.is_empty() {
            return Err(DataError::NoUsableRows { dropped: self.dropped });
        }
        let n_cols = self.header.len();
        let params: Vec<NormParam> = (0..n_cols)
            .map(|j| NormParam::fit(&self.rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        if params[t].is_constant() {
            return Err(DataError::ConstantTarget(target.to_string()));
        }
        let feature_cols: Vec<usize> = (0..n_cols).filter(|&j| j != t).collect();
        let features = self
            .rows
            .iter()
            .map(|r| feature_cols.iter().map(|&j| params[j].normalize(r[j])).collect())
            .collect();
        let labels = self
            .rows
            .iter()
            .map(|r| u8::from(params[t].normalize(r[t]) >= threshold))
            .collect();
        Dataset::new(
            features,
            labels,
            feature_cols.iter().map(|&j| self.header[j].clone()).collect(),
            feature_cols.iter().map(|&j| params[j]).collect(),
        )
    }
}

/// Result of [`ingest_csv`].
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Reads a headed CSV, drops rows with empty or unparseable cells, min-max
/// normalizes every column over the whole file and labels a row 1 iff its
/// normalized target is `>= threshold`.
pub fn ingest_csv(path: &Path, target_column: &str, threshold: f64) -> Result<Ingested, DataError> {
    let table = RawTable::read_csv(path)?;
    let dropped_rows = table.dropped;
    let dataset = table.into_dataset(target_column, threshold)?;
    Ok(Ingested { dataset, dropped_rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle followed by an 80/20 partition (train gets the floor).
pub fn split(ds: &Dataset, seed: u64) -> Result<Split, DataError> {
    if ds.n_rows() < 5 {
        return Err(DataError::TooFewRows { needed: 5, got: ds.n_rows() });
    }
    let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * ds.n_rows() as f64).floor() as usize;
    Ok(Split { train: ds.subset(&idx[..n_train]), test: ds.subset(&idx[n_train..]) })
}

/// A row with some coordinates unobserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompleteInstance(pub Vec<Option<f64>>);

impl IncompleteInstance {
    pub fn complete(values: &[f64]) -> Self {
        IncompleteInstance(values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn missing(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i)
    }

    pub fn n_missing(&self) -> usize {
        self.0.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    /// Parses `0.2,*,0.9`; `*`, `?`, `-`, `NA` and empty cells are missing.
    pub fn parse(s: &str) -> Result<Self, DataError> {
        s.split(',')
            .map(|c| match c.trim() {
                "*" | "?" | "-" | "NA" | "" => Ok(None),
                c => c
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| DataError::InvalidParams(format!("bad instance cell `{c}`"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(IncompleteInstance)
    }
}

impl fmt::Display for IncompleteInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .0
            .iter()
            .map(|v| v.map_or_else(|| "*".to_string(), |x| format!("{x}")))
            .collect();
        write!(f, "({})", cells.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub m: usize,
    pub seed: u64,
}

/// Removes exactly `spec.m` coordinates, chosen uniformly without replacement.
pub fn mask_mcar(x: &[f64], spec: MaskSpec) -> Result<IncompleteInstance, DataError> {
    let n = x.len();
    if spec.m > n {
        return Err(DataError::MaskTooLarge { m: spec.m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = IncompleteInstance::complete(x);
    for i in rand::seq::index::sample(&mut rng, n, spec.m) {
        out.0[i] = None;
    }
    Ok(out)
}

/// Two unit-variance Gaussian clusters whose centres are `separation` apart
/// along the all-ones direction, min-max normalized. Class sizes differ by at
/// most one row.
pub fn synth_blobs(
    n_rows: usize,
    n_features: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n_rows < 4 || n_features < 1 || !(separation > 0.0) {
        return Err(DataError::InvalidParams(format!(
            "n_rows={n_rows}, n_features={n_features}, separation={separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / 2.0 / (n_features as f64).sqrt();
    let mut rows: Vec<(Vec<f64>, u8)> = (0..n_rows)
        .map(|i| {
            let label = u8::from(i >= n_rows / 2);
            let centre = if label == 1 { offset } else { -offset };
            let row = (0..n_features)
                .map(|_| centre + rng.sample::<f64, _>(StandardNormal))
                .collect();
            (row, label)
        })
        .collect();
    rows.shuffle(&mut rng);
    let header = (0..n_features).map(|j| format!("x{j}")).collect();
    normalize_labeled(header, rows)
}

fn normalize_labeled(header: Vec<String>, rows: Vec<(Vec<f64>, u8)>) -> Result<Dataset, DataError> {
    let n = header.len();
    let params: Vec<NormParam> = (0..n)
        .map(|j| NormParam::fit(&rows.iter().map(|(r, _)| r[j]).collect::<Vec<_>>()))
        .collect();
    let features = rows
        .iter()
        .map(|(r, _)| r.iter().zip(&params).map(|(&v, p)| p.normalize(v)).collect())
        .collect();
    let labels = rows.iter().map(|(_, l)| *l).collect();
    Dataset::new(features, labels, header, params)
}

/// Parameters of [`synth_regression`], a tabular regression stand-in whose
/// features are smooth nonlinear functions of a few latent factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_latent: usize,
    /// Standard deviation of the per-feature observation noise.
    pub noise: f64,
    pub seed: u64,
}

/// Generates a raw table `x0..x{n-1}, target` where every feature mixes the
/// latent factors through a random linear map plus a sinusoidal term, and the
/// target is a nonlinear function of the latents. Features are correlated, so
/// observed coordinates carry information about missing ones.
pub fn synth_regression(spec: &RegressionSpec) -> Result<RawTable, DataError> {
    let RegressionSpec { n_rows, n_features, n_latent, noise, seed } = *spec;
    if n_rows < 4 || n_features < 1 || n_latent < 1 || !(noise >= 0.0) {
        return Err(DataError::InvalidParams(format!("{spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix: Vec<Vec<f64>> = (0..n_features)
        .map(|_| (0..n_latent).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let phase: Vec<f64> = (0..n_features).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let bend: Vec<f64> = (0..n_features).map(|_| rng.random_range(0.3..0.8)).collect();
    let target_w: Vec<f64> = (0..n_latent).map(|_| rng.random_range(0.5..1.5)).collect();

    let rows = (0..n_rows)
        .map(|_| {
            let z: Vec<f64> = (0..n_latent).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut row: Vec<f64> = (0..n_features)
                .map(|k| {
                    let lin: f64 = mix[k].iter().zip(&z).map(|(a, b)| a * b).sum();
                    let eps: f64 = rng.sample(StandardNormal);
                    lin + bend[k] * (3.0 * z[k % n_latent] + phase[k]).sin() + noise * eps
                })
                .collect();
            let lin: f64 = target_w.iter().zip(&z).map(|(a, b)| a * b).sum();
            row.push(lin + 0.5 * (z[0] * 4.0).sin());
            row
        })
        .collect();
    let mut header: Vec<String> = (0..n_features).map(|j| format!("x{j}")).collect();
    header.push("target".into());
    Ok(RawTable { header, rows, dropped: 0 })
}

pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn min_max_normalizes_columns() {
        let f = write_tmp("a,b,y\n0,7,0.2\n5,7,0.5\n10,7,0.9\n");
        let ing = ingest_csv(f.path(), "y", 0.5).unwrap();
        let ds = ing.dataset;
        assert_eq!(ds.column(0).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        // constant column
        assert_eq!(ds.column(1).collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn binarizes_with_ties_to_one() {
        // raw targets 0, 0.375, 1 normalize to 0, 0.375, 1 (min 0, max 1)
        let f = write_tmp("a,y\n1,0\n2,0.5\n3,1\n4,0.2\n");
        let ds = ingest_csv(f.path(), "y", 0.5).unwrap().dataset;
        assert_eq!(ds.labels, vec![0, 1, 1, 0]);
    }

    #[test]
    fn normalized_target_thresholds() {
        // targets normalize to 0.2, 0.5, 0.9 given min 0 and max 1 rows
        let f = write_tmp("a,y\n1,0\n2,0.2\n3,0.5\n4,0.9\n5,1\n");
        let ds = ingest_csv(f.path(), "y", 0.5).unwrap().dataset;
        assert_eq!(&ds.labels[1..4], &[0, 1, 1]);
    }

    #[test]
    fn drops_bad_rows_and_counts_them() {
        let f = write_tmp("a,y\n1,0\n,1\nfoo,2\n3,4\n");
        let ing = ingest_csv(f.path(), "y", 0.5).unwrap();
        assert_eq!(ing.dropped_rows, 2);
        assert_eq!(ing.dataset.n_rows(), 2);
    }

    #[test]
    fn ingest_errors_are_distinct() {
        let missing = ingest_csv(Path::new("/nonexistent/file.csv"), "y", 0.5);
        assert!(matches!(missing, Err(DataError::MissingFile { .. })));

        let f = write_tmp("a,y\n1,2\n");
        assert!(matches!(ingest_csv(f.path(), "z", 0.5), Err(DataError::MissingColumn(_))));

        let f = write_tmp("a,y\n,2\nx,3\n");
        assert!(matches!(
            ingest_csv(f.path(), "y", 0.5),
            Err(DataError::NoUsableRows { dropped: 2 })
        ));

        let f = write_tmp("a,y\n1,3\n2,3\n");
        assert!(matches!(ingest_csv(f.path(), "y", 0.5), Err(DataError::ConstantTarget(_))));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let ds = synth_blobs(10, 2, 1.0, 0).unwrap();
        let s = split(&ds, 3).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows()), (8, 2));

        let ds = synth_blobs(101, 2, 1.0, 0).unwrap();
        let s = split(&ds, 3).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows()), (80, 21));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = synth_blobs(50, 3, 1.0, 9).unwrap();
        let a = split(&ds, 11).unwrap();
        let b = split(&ds, 11).unwrap();
        assert_eq!(a, b);
        for row in &a.test.features {
            assert!(!a.train.features.contains(row));
        }
        assert!(split(&ds.subset(&[0, 1, 2, 3]), 0).is_err());
    }

    #[test]
    fn mask_edge_cases() {
        let x = [0.2, 0.5, 0.9];
        let none = mask_mcar(&x, MaskSpec { m: 0, seed: 1 }).unwrap();
        assert_eq!(none, IncompleteInstance::complete(&x));
        let all = mask_mcar(&x, MaskSpec { m: 3, seed: 1 }).unwrap();
        assert_eq!(all.0, vec![None, None, None]);
        let one = mask_mcar(&x, MaskSpec { m: 1, seed: 42 }).unwrap();
        assert_eq!(one.n_missing(), 1);
        for (o, v) in one.0.iter().zip(&x) {
            if let Some(o) = o {
                assert_eq!(o, v);
            }
        }
        assert!(matches!(
            mask_mcar(&x, MaskSpec { m: 4, seed: 0 }),
            Err(DataError::MaskTooLarge { m: 4, n: 3 })
        ));
    }

    #[test]
    fn mcar_is_uniform() {
        let x = [0.1, 0.2, 0.3, 0.4];
        let mut hits = [0usize; 4];
        for seed in 0..10_000u64 {
            let masked = mask_mcar(&x, MaskSpec { m: 1, seed }).unwrap();
            hits[masked.missing().next().unwrap()] += 1;
        }
        for h in hits {
            let freq = h as f64 / 10_000.0;
            assert!((freq - 0.25).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let ds = synth_blobs(100, 2, 3.0, 5).unwrap();
        assert_eq!(ds.class_counts(), [50, 50]);
        let odd = synth_blobs(101, 2, 3.0, 5).unwrap();
        let [a, b] = odd.class_counts();
        assert!(a.abs_diff(b) <= 1);
        assert_eq!(ds, synth_blobs(100, 2, 3.0, 5).unwrap());
        assert!(synth_blobs(3, 2, 1.0, 0).is_err());
        assert!(synth_blobs(10, 0, 1.0, 0).is_err());
        assert!(synth_blobs(10, 2, 0.0, 0).is_err());
    }

    #[test]
    fn regression_table_roundtrips_through_csv() {
        let spec = RegressionSpec { n_rows: 40, n_features: 4, n_latent: 2, noise: 0.05, seed: 3 };
        let table = synth_regression(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        table.write_csv(&path).unwrap();
        let ds = ingest_csv(&path, "target", 0.5).unwrap().dataset;
        assert_eq!(ds.n_rows(), 40);
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds, table.into_dataset("target", 0.5).unwrap());
    }

    #[test]
    fn parses_incomplete_instances() {
        let x = IncompleteInstance::parse("0.2, *,0.9,?").unwrap();
        assert_eq!(x.0, vec![Some(0.2), None, Some(0.9), None]);
        assert_eq!(x.to_string(), "(0.2, *, 0.9, *)");
        assert!(IncompleteInstance::parse("0.2,abc").is_err());
    }

    proptest! {
        #[test]
        fn normalization_roundtrip(values in prop::collection::vec(-1e6f64..1e6, 2..20)) {
            let p = NormParam::fit(&values);
            prop_assume!(!p.is_constant());
            for v in values {
                let back = p.denormalize(p.normalize(v));
                prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(p.max - p.min).max(1.0));
            }
        }

        #[test]
        fn mask_has_exactly_m_missing(n in 1usize..12, m_frac in 0.0f64..=1.0, seed: u64) {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let m = ((n as f64) * m_frac).floor() as usize;
            let masked = mask_mcar(&x, MaskSpec { m, seed }).unwrap();
            prop_assert_eq!(masked.n_missing(), m);
        }
    }
}
